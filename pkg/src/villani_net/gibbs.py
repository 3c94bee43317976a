"""Desk-scale Gibbs-measure quantities for 1- and 2-parameter problems.

For a potential U on R^pd (pd <= 2) and temperature s, the stationary law of
the training diffusion is mu_s = exp(-2U/s)/Z_s. This module computes Z_s by
converged Simpson quadrature, the deviation constant
C = (int (U - min U)^2 dmu_s)^(1/2), the grid infimum machinery behind
epsilon(r) = 1/inf{V_s : ||W|| >= r}, a finite-volume spectral gap of the
generator -grad U . grad + (s/2) Laplacian (symmetric in L^2(mu_s), Neumann
walls), Poincare-ratio checks, and the assembled lambda_s formula
    lambda_s = (1 + 3 s inf V_s eps(r)) / (2 (C(r) + 3 eps(r))).

The Poincare check evaluates both sides with the same discrete Dirichlet form
the eigensolver uses, so ratio <= 1 is a theorem of the discrete problem, not
a numerical accident.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import eigsh
from scipy.special import erfc

from .net_loss import LossSpec, stacked_grad, stacked_laplacian, stacked_risk

TAIL_MASS_CAP = 1e-8
QUAD_RTOL = 1e-6
GAP_REFINE_RTOL = 0.05


def _fd_grad(value_fn, pts, h=1e-6):
    g = np.empty_like(pts)
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = h
        g[:, a] = (value_fn(pts + e) - value_fn(pts - e)) / (2 * h)
    return g


def _fd_lap(value_fn, pts, h=1e-4):
    out = np.zeros(pts.shape[0])
    base = value_fn(pts)
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = h
        out += (value_fn(pts + e) - 2 * base + value_fn(pts - e)) / (h * h)
    return out


@dataclass
class GibbsLab:
    """A potential on a truncated box, gridded for quadrature and eigensolves.

    value_fn/grad_fn/lap_fn are vectorized over point stacks of shape
    (k, dims). tail_lam and tail_offset certify U >= tail_lam/2 ||W||^2 +
    tail_offset outside the box, which bounds the mass the truncation drops;
    construction fails if that bound exceeds 1e-8 of the box mass.
    """

    dims: int
    box_r: float
    grid_n: int
    temp_s: float
    value_fn: object
    grad_fn: object = None
    lap_fn: object = None
    tail_lam: float = 0.0
    tail_offset: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ValueError("lab supports only 1 or 2 parameters")
        if self.grid_n < 64:
            raise ValueError("grid_n must be >= 64")
        if not (self.temp_s > 0 and math.isfinite(self.temp_s)):
            raise ValueError("temp_s must be positive")
        if not (self.box_r > 0):
            raise ValueError("box_r must be positive")
        self._check_tail_mass()

    # -- potential evaluation ------------------------------------------------

    def value(self, pts) -> np.ndarray:
        return np.asarray(self.value_fn(np.asarray(pts, dtype=float)), dtype=float)

    def grad(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(pts), dtype=float)
        return _fd_grad(self.value, pts)

    def lap(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.lap_fn is not None:
            return np.asarray(self.lap_fn(pts), dtype=float)
        return _fd_lap(self.value, pts)

    def v_s(self, pts) -> np.ndarray:
        """Confinement functional ||grad U||^2/s - lap U at each point."""
        g = self.grad(pts)
        return np.sum(g * g, axis=1) / self.temp_s - self.lap(pts)

    # -- grids ---------------------------------------------------------------

    def axis(self, n_intervals=None) -> np.ndarray:
        n = self.grid_n if n_intervals is None else n_intervals
        return np.linspace(-self.box_r, self.box_r, n + 1)

    def grid_points(self, n_intervals=None) -> np.ndarray:
        ax = self.axis(n_intervals)
        if self.dims == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def _check_tail_mass(self):
        if self.tail_lam <= 0:
            raise ValueError(
                "tail-mass invariant violated: need a positive quadratic "
                "minorant coefficient (tail_lam) to certify box truncation"
            )
        a = self.tail_lam / self.temp_s  # density <= exp(-2off/s) exp(-a r^2)
        pref = math.exp(-2.0 * self.tail_offset / self.temp_s)
        line = math.sqrt(math.pi / a)
        strip = line * erfc(self.box_r * math.sqrt(a))
        tail = pref * (strip if self.dims == 1 else 2.0 * line * strip)
        pts = self.grid_points(128)
        u = self.value(pts)
        dens = np.exp(-2.0 * (u - u.min()) / self.temp_s)
        h = 2.0 * self.box_r / 128
        box_mass = math.exp(-2.0 * u.min() / self.temp_s) * float(
            np.sum(dens)
        ) * h ** self.dims
        if tail > TAIL_MASS_CAP * box_mass:
            raise ValueError(
                f"tail-mass invariant violated: certified tail {tail:.3e} "
                f"exceeds {TAIL_MASS_CAP:.0e} of box mass {box_mass:.3e}"
            )


def gibbs_lab_from_spec(spec: LossSpec, outer, box_r, grid_n, temp_s, label="") -> GibbsLab:
    """Lab whose potential is the regularized risk of a pd <= 2 instance."""
    outer = np.asarray(outer, dtype=float)
    p, d = outer.shape[0], spec.data.d
    if p * d > 2:
        raise ValueError("lab requires p * d <= 2 trainable parameters")
    if spec.lam <= 0:
        raise ValueError("lab needs lam > 0 for the quadratic tail minorant")

    def as_stack(pts):
        return np.asarray(pts, dtype=float).reshape(-1, p, d)

    # the logistic term never drops below l(max attainable margin)
    if math.isfinite(spec.activation.b_sigma):
        loss_floor = math.log1p(
            math.exp(-float(np.sum(np.abs(outer))) * spec.activation.b_sigma)
        )
    else:
        loss_floor = 0.0

    return GibbsLab(
        dims=p * d,
        box_r=float(box_r),
        grid_n=int(grid_n),
        temp_s=float(temp_s),
        value_fn=lambda pts: stacked_risk(spec, outer, as_stack(pts)),
        grad_fn=lambda pts: stacked_grad(spec, outer, as_stack(pts)).reshape(-1, p * d),
        lap_fn=lambda pts: stacked_laplacian(spec, outer, as_stack(pts)),
        tail_lam=spec.lam,  # risk >= lam/2 ||W||^2 + loss floor
        tail_offset=loss_floor,
        label=label,
    )


def gibbs_lab_from_potential(
    value_fn, dims, box_r, grid_n, temp_s, grad_fn=None, lap_fn=None,
    tail_lam=0.0, tail_offset=0.0, label="",
) -> GibbsLab:
    """Lab for an arbitrary potential callable (vectorized over (k, dims))."""
    return GibbsLab(
        dims=int(dims),
        box_r=float(box_r),
        grid_n=int(grid_n),
        temp_s=float(temp_s),
        value_fn=value_fn,
        grad_fn=grad_fn,
        lap_fn=lap_fn,
        tail_lam=float(tail_lam),
        tail_offset=float(tail_offset),
        label=label,
    )


# -- quadrature ---------------------------------------------------------------


def _simpson_integral(lab: GibbsLab, g_of_u, n_intervals, shift) -> float:
    ax = lab.axis(n_intervals)
    pts = lab.grid_points(n_intervals)
    u = lab.value(pts)
    vals = g_of_u(u) * np.exp(-2.0 * (u - shift) / lab.temp_s)
    if lab.dims == 1:
        return float(simpson(vals, x=ax))
    grid = vals.reshape(len(ax), len(ax))
    return float(simpson(simpson(grid, x=ax, axis=1), x=ax))


def _converged_integral(lab: GibbsLab, g_of_u, shift) -> float:
    coarse = _simpson_integral(lab, g_of_u, lab.grid_n, shift)
    fine = _simpson_integral(lab, g_of_u, 2 * lab.grid_n, shift)
    denom = max(abs(fine), 1e-300)
    if abs(fine - coarse) / denom > QUAD_RTOL:
        raise RuntimeError(
            f"quadrature not converged to {QUAD_RTOL:.0e} between "
            f"{lab.grid_n} and {2 * lab.grid_n} intervals"
        )
    return fine


def partition_function(lab: GibbsLab) -> float:
    """Z_s = integral of exp(-2 U / s) over the box, Richardson-checked."""
    shift = float(np.min(lab.value(lab.grid_points())))
    hat = _converged_integral(lab, lambda u: np.ones_like(u), shift)
    return math.exp(-2.0 * shift / lab.temp_s) * hat


def c_constant(lab: GibbsLab, global_min: float) -> float:
    """C = sqrt( E_mu (U - min U)^2 ), the risk-deviation constant."""
    shift = float(np.min(lab.value(lab.grid_points())))
    num = _converged_integral(lab, lambda u: (u - global_min) ** 2, shift)
    z = _converged_integral(lab, lambda u: np.ones_like(u), shift)
    return math.sqrt(max(num / z, 0.0))


# -- minimization ---------------------------------------------------------------


def global_min_scan(lab: GibbsLab):
    """Dense grid scan plus gradient-descent polish with backtracking.

    Returns (min value, argmin). When the minimum is sign-symmetric the
    lexicographically larger of the +/- pair is reported as the canonical
    representative.
    """
    pts = lab.grid_points(2 * lab.grid_n)
    u = lab.value(pts)
    x = pts[int(np.argmin(u))].copy()
    fx = float(lab.value(x[None, :])[0])
    for _ in range(500):
        g = lab.grad(x[None, :])[0]
        gn = float(np.linalg.norm(g))
        if gn <= 1e-10:
            break
        t = 1.0
        while t > 1e-20:
            cand = x - t * g
            fc = float(lab.value(cand[None, :])[0])
            if fc <= fx - 0.5 * t * gn * gn:
                x, fx = cand, fc
                break
            t *= 0.5
        else:
            break
    mirrored = -x
    fm = float(lab.value(mirrored[None, :])[0])
    if fm <= fx + 1e-12 * max(1.0, abs(fx)) and tuple(mirrored) > tuple(x):
        x, fx = mirrored, min(fx, fm)
    return fx, x


# -- confinement geometry -------------------------------------------------------


def epsilon_r(lab: GibbsLab, r: float) -> float:
    """1 / inf{ V_s(W) : ||W|| >= r } over the box grid."""
    pts = lab.grid_points()
    mask = np.linalg.norm(pts, axis=1) >= r - 1e-12
    if not np.any(mask):
        raise ValueError(f"radius {r} leaves no grid points inside the box")
    inf_v = float(np.min(lab.v_s(pts[mask])))
    if inf_v <= 0:
        raise ValueError(
            f"V_s has non-positive infimum {inf_v:.6g} beyond radius {r}; "
            "r is below the positivity radius"
        )
    return 1.0 / inf_v


def inf_v_s(lab: GibbsLab) -> float:
    """Grid infimum of V_s over the whole box (may be negative)."""
    return float(np.min(lab.v_s(lab.grid_points())))


def lambda_s_formula(lab: GibbsLab, r: float, c_r: float) -> float:
    """(1 + 3 s inf V_s eps(r)) / (2 (c_r + 3 eps(r))).

    inf V_s is taken over the full box grid and used as-is, so the assembled
    value can legitimately be zero or negative on easy instances.
    """
    eps = epsilon_r(lab, r)
    inf_v = inf_v_s(lab)
    return (1.0 + 3.0 * lab.temp_s * inf_v * eps) / (2.0 * (c_r + 3.0 * eps))


# -- generator discretization ----------------------------------------------------


def _axis_weights(npts: int, h: float) -> np.ndarray:
    w = np.full(npts, h)
    w[0] = w[-1] = h / 2.0
    return w


MU_FLOOR = 1e-250


def _generator_matrices(lab: GibbsLab, n_intervals: int, restrict_radius=None):
    """Finite-volume stiffness K, lumped mass M, and kept-node mask.

    K encodes the Dirichlet form (s/2) sum_faces mu(face) (dh/h)^2 vol(face)
    with Neumann (zero-flux) walls; M is diag(mu(node) vol(cell)). The pencil
    (K, M) is symmetric, its null vector is the constant, and its smallest
    nonzero eigenvalue is the spectral gap in L^2(mu_s). Nodes whose relative
    density underflows past MU_FLOOR are dropped (they carry no mass and would
    make the symmetrized operator singular).
    """
    ax = lab.axis(n_intervals)
    h = ax[1] - ax[0]
    npts = len(ax)
    pts = lab.grid_points(n_intervals)
    u = lab.value(pts)
    u0 = float(np.min(u))
    mu = np.exp(-2.0 * (u - u0) / lab.temp_s)
    aw = _axis_weights(npts, h)

    vol = aw if lab.dims == 1 else np.outer(aw, aw).ravel()
    keep = mu >= MU_FLOOR
    if restrict_radius is not None:
        keep &= np.linalg.norm(pts, axis=1) <= restrict_radius + 1e-12
    if int(keep.sum()) < 3:
        raise ValueError("generator grid keeps too few nodes")
    remap = -np.ones(len(pts), dtype=int)
    remap[keep] = np.arange(int(keep.sum()))

    rows, cols, vals = [], [], []

    def add_faces(ia, ib, trans_w):
        mid = 0.5 * (pts[ia] + pts[ib])
        mu_f = np.exp(-2.0 * (lab.value(mid) - u0) / lab.temp_s)
        w = (lab.temp_s / 2.0) * mu_f * trans_w / (h * h) * h  # vol(face)=h*trans
        a, b = remap[ia], remap[ib]
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([w, w, -w, -w])

    if lab.dims == 1:
        ia = np.arange(npts - 1)
        ib = ia + 1
        ok = keep[ia] & keep[ib]
        if np.any(ok):
            add_faces(ia[ok], ib[ok], np.ones(int(ok.sum())))
    else:
        idx = np.arange(npts * npts).reshape(npts, npts)
        # faces along the first axis: (i,j)-(i+1,j), transverse weight aw[j]
        ia = idx[:-1, :].ravel()
        ib = idx[1:, :].ravel()
        tw = np.broadcast_to(aw[None, :], (npts - 1, npts)).ravel()
        ok = keep[ia] & keep[ib]
        if np.any(ok):
            add_faces(ia[ok], ib[ok], tw[ok])
        # faces along the second axis: (i,j)-(i,j+1), transverse weight aw[i]
        ia = idx[:, :-1].ravel()
        ib = idx[:, 1:].ravel()
        tw = np.broadcast_to(aw[:, None], (npts, npts - 1)).ravel()
        ok = keep[ia] & keep[ib]
        if np.any(ok):
            add_faces(ia[ok], ib[ok], tw[ok])

    nkeep = int(keep.sum())
    rows = np.concatenate([np.asarray(r).ravel() for r in rows]) if rows else np.array([], int)
    cols = np.concatenate([np.asarray(c).ravel() for c in cols]) if cols else np.array([], int)
    vals = np.concatenate([np.asarray(v).ravel() for v in vals]) if vals else np.array([])
    K = csr_matrix((vals, (rows, cols)), shape=(nkeep, nkeep))
    M = mu[keep] * vol[keep]
    return K, M, keep


def _gap_once(lab: GibbsLab, n_intervals: int, restrict_radius=None) -> float:
    K, M, _ = _generator_matrices(lab, n_intervals, restrict_radius)
    d = 1.0 / np.sqrt(M)
    B = K.multiply(d[:, None]).multiply(d[None, :]).tocsc()
    scale = float(np.max(np.abs(B.diagonal()))) or 1.0
    v0 = np.random.default_rng(0).standard_normal(B.shape[0])
    try:
        vals = eigsh(
            B, k=2, sigma=-1e-10 * scale, which="LM", v0=v0,
            return_eigenvectors=False, tol=0,
        )
    except Exception as exc:  # pragma: no cover - solver failure path
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    vals = np.sort(np.real(vals))
    if vals[0] > 1e-6 * max(vals[1], 1.0):
        raise RuntimeError("eigensolver lost the constant null mode")
    return float(vals[1])


def spectral_gap(lab: GibbsLab, restrict_radius=None, check_refinement=True) -> float:
    """Smallest nonzero generator eigenvalue (mixing rate toward mu_s).

    Computed at the lab grid; a half-resolution solve guards against an
    unconverged grid (> 5% drift raises).
    """
    gap = _gap_once(lab, lab.grid_n, restrict_radius)
    if check_refinement:
        coarse = _gap_once(lab, lab.grid_n // 2, restrict_radius)
        if abs(gap - coarse) > GAP_REFINE_RTOL * abs(gap):
            raise RuntimeError(
                f"spectral gap unstable under refinement: {coarse:.6g} vs {gap:.6g}"
            )
    return gap


def c_restricted(lab: GibbsLab, r: float) -> float:
    """Poincare constant of the ball-restricted measure, from its gap.

    The restricted inequality reads Var <= s C(r) E||grad h||^2, and the
    restricted generator gap lambda_r gives Var <= (s/(2 lambda_r)) E, so
    C(r) = 1/(2 lambda_r).
    """
    return 1.0 / (2.0 * spectral_gap(lab, restrict_radius=r))


# -- Poincare check ---------------------------------------------------------------


def boundary_taper(pts: np.ndarray, box_r: float, frac: float = 0.1) -> np.ndarray:
    """Smooth [0,1] cutoff: 1 on the inner (1-frac) box, 0 on the walls."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    inner = box_r * (1.0 - frac)
    out = np.ones(pts.shape[0])
    for a in range(pts.shape[1]):
        t = (np.abs(pts[:, a]) - inner) / (box_r - inner)
        t = np.clip(t, 0.0, 1.0)
        factor = np.cos(0.5 * math.pi * t) ** 2
        factor[t >= 1.0] = 0.0
        out *= factor
    return out


def poincare_check(lab: GibbsLab, test_functions, lambda_s=None) -> dict:
    """Ratio Var(h) / ((s/2 lambda_s) E||grad h||^2) for tapered test functions.

    Both sides use the eigensolver's own discrete Dirichlet form, so every
    ratio is <= 1 up to solver tolerance; the first nontrivial eigenfunction
    saturates it. Entries of test_functions are (name, callable) pairs or
    bare callables vectorized over (k, dims) stacks.
    """
    if lambda_s is None:
        lambda_s = spectral_gap(lab)
    K, M, keep = _generator_matrices(lab, lab.grid_n)
    pts = lab.grid_points()[keep]
    taper = boundary_taper(pts, lab.box_r)
    msum = float(np.sum(M))
    rows = []
    all_ok = True
    for entry in test_functions:
        name, fn = entry if isinstance(entry, tuple) else (getattr(entry, "__name__", "h"), entry)
        h = np.asarray(fn(pts), dtype=float) * taper
        mean = float(np.dot(M, h)) / msum
        var = float(np.dot(M, (h - mean) ** 2)) / msum
        quad = float(h @ (K @ h)) / msum  # (s/2) E ||grad h||^2
        rhs = quad / lambda_s
        ratio = 0.0 if rhs == 0.0 else var / rhs
        ok = ratio <= 1.0 + 1e-3
        all_ok = all_ok and ok
        rows.append(
            {
                "name": name,
                "variance": var,
                "dirichlet": (2.0 / lab.temp_s) * quad,
                "rhs": rhs,
                "ratio": ratio,
                "ok": ok,
            }
        )
    return {"lambda_s": float(lambda_s), "functions": rows, "all_ok": all_ok}


# -- assembled report -------------------------------------------------------------


def lab_report(lab: GibbsLab, r: float) -> dict:
    """All desk-scale quantities of the lab in one JSON-ready dict."""
    gmin, argmin = global_min_scan(lab)
    gap = spectral_gap(lab)
    c_r = c_restricted(lab, r)
    return {
        "z_s": partition_function(lab),
        "c_constant": c_constant(lab, gmin),
        "global_min": gmin,
        "argmin": [float(v) for v in argmin],
        "epsilon_r": epsilon_r(lab, r),
        "radius": float(r),
        "inf_v_s": inf_v_s(lab),
        "spectral_gap": gap,
        "c_restricted": c_r,
        "lambda_s_formula": lambda_s_formula(lab, r, c_r),
        "grid_n": lab.grid_n,
        "box": lab.box_r,
        "temp_s": lab.temp_s,
        "dims": lab.dims,
        "label": lab.label,
    }
