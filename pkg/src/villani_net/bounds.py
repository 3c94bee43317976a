"""Analytic constants and inequalities for the regularized logistic risk:
the critical regularization threshold lambda_c, a gradient-norm lower bound
and Laplacian upper bound in ||W||_F, the gradient-Lipschitz bound gLip, and
the numerical confinement verifier V_s(W) = ||grad||^2/s - Laplacian.

The confinement check certifies that V_s diverges along rays, which is the
operational form of the condition making the risk a Villani function: the
analytic minorant of V_s is an upward quadratic in r when g1 > 0, and sampled
rays must dominate it and cross a high-water mark.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationProfile
from .net_loss import LossSpec, NetState, exact_laplacian, full_grad

LAMBDA_C_VARIANTS = ("lemma", "proof")


class UnboundedActivationError(ValueError):
    """Raised when a bound needs finite sup|sigma| but the activation is unbounded."""


def lambda_c(profile: ActivationProfile, a_norm: float, b_x: float, variant: str = "lemma") -> float:
    """Critical regularization threshold.

    lemma variant: M_D * L * B_x^2 * ||a||^2 / 2. proof variant: 4x that.
    Above the threshold the quadratic coefficient of the gradient lower bound
    is positive and the risk is confining.
    """
    if variant not in LAMBDA_C_VARIANTS:
        raise ValueError(f"variant must be one of {LAMBDA_C_VARIANTS}")
    if a_norm < 0 or b_x < 0:
        raise ValueError("a_norm and b_x must be >= 0")
    base = profile.m_d * profile.lipschitz_l * b_x * b_x * a_norm * a_norm
    return base / 2.0 if variant == "lemma" else 2.0 * base


def _c_norm(profile: ActivationProfile, p: int) -> float:
    # c = sigma(0) * ones(p), so ||c||_2 = |sigma(0)| sqrt(p)
    return abs(profile.c0) * math.sqrt(p)


def grad_lb_coeffs(spec: LossSpec, net: NetState) -> tuple:
    """(quadratic, linear) coefficients (g1, g2) of the gradient-norm-squared
    lower bound g1 * w^2 - g2 * w in w = ||W||_F."""
    prof = spec.activation
    lam = spec.lam
    a = net.a_norm
    bx = spec.data.b_x
    cn = _c_norm(prof, net.p)
    g1 = lam * lam - lam * a * a * prof.m_d * bx * bx * prof.lipschitz_l / 2.0
    g2 = lam * a * prof.m_d * bx * (1.0 + a * cn / 2.0)
    return g1, g2


def grad_lower_bound(spec: LossSpec, net: NetState, w_fro: float) -> float:
    """Lower bound on ||grad risk(W)||_F^2 valid for every W with ||W||_F = w_fro."""
    if w_fro < 0:
        raise ValueError("w_fro must be >= 0")
    g1, g2 = grad_lb_coeffs(spec, net)
    return g1 * w_fro * w_fro - g2 * w_fro


def lap_ub_coeffs(spec: LossSpec, net: NetState) -> tuple:
    """(constant, linear) coefficients of the Laplacian upper bound in ||W||_F."""
    prof = spec.activation
    a = net.a_norm
    bx = spec.data.b_x
    cn = _c_norm(prof, net.p)
    p, d = net.p, net.d
    const = p * (
        ((2.0 + cn) / 4.0) * bx * bx * prof.m_d_prime * a
        + prof.m_d * prof.m_d * bx * bx * a * a / 4.0
        + spec.lam * d
    )
    linear = p * (a * prof.lipschitz_l * bx / 4.0) * bx * bx * prof.m_d_prime * a
    return const, linear


def laplacian_upper_bound(spec: LossSpec, net: NetState, w_fro: float) -> float:
    """Upper bound on the risk Laplacian, affine in w_fro = ||W||_F."""
    if w_fro < 0:
        raise ValueError("w_fro must be >= 0")
    const, linear = lap_ub_coeffs(spec, net)
    return const + linear * w_fro


def glip_bound(spec: LossSpec, net: NetState, per_row: bool = False) -> float:
    """Bound on the gradient Lipschitz constant of the risk.

    Default is the concluding display
        sqrt(p) ( sqrt(p) ||a|| M_D^2 B_x / 4
                  + ((2 + ||c|| + ||a|| B_sigma)/4) M_D' B_x p + lambda ).
    The per_row flag instead propagates the intermediate per-row constant,
    which carries one extra power of both B_x and ||a|| in the product terms;
    the two agree when ||a|| = B_x = 1. The default form is the tight one in
    the normalized regime ||a||, B_x <= 1 where the derivation applies.
    """
    prof = spec.activation
    if not prof.bounded:
        raise UnboundedActivationError(
            "gradient-Lipschitz bound requires a bounded activation"
        )
    a = net.a_norm
    bx = spec.data.b_x
    p = net.p
    cn = _c_norm(prof, p)
    sp = math.sqrt(p)
    if per_row:
        t1 = a * a * prof.m_d * prof.m_d * bx * bx * sp / 4.0
        t2 = ((2.0 + cn + a * prof.b_sigma) / 4.0) * prof.m_d_prime * bx * bx * a * p
    else:
        t1 = sp * a * prof.m_d * prof.m_d * bx / 4.0
        t2 = ((2.0 + cn + a * prof.b_sigma) / 4.0) * prof.m_d_prime * bx * p
    return sp * (t1 + t2 + spec.lam)


def v_s(spec: LossSpec, net: NetState, s: float) -> float:
    """V_s(W) = ||grad risk||_F^2 / s - Laplacian(risk), the confinement functional."""
    if s <= 0:
        raise ValueError("s must be > 0")
    g = full_grad(spec, net)
    return float(np.sum(g * g)) / s - exact_laplacian(spec, net)


DEFAULT_RADIUS_SCHEDULE = tuple(float(2 ** k) for k in range(11))


@dataclass
class VillaniReport:
    """Confinement verification result plus every analytic constant used.

    grad_lb_coeffs holds (quadratic, linear) of the gradient lower bound;
    lap_ub_coeffs holds (constant, linear) of the Laplacian upper bound;
    glip_bound is None when the activation is unbounded. divergence_verified
    records whether g1 > 0 and the sampled rays dominated the minorant and
    crossed the high-water mark on the stated radius schedule.
    """

    lambda_c_lemma: float
    lambda_c_proof: float
    g1_lemma: float
    g1_proof: float
    glip_bound: float | None
    grad_lb_coeffs: tuple
    lap_ub_coeffs: tuple
    divergence_verified: bool
    radius_schedule: tuple
    high_water: float
    temp_s: float
    min_vs_by_radius: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.lambda_c_proof - 4.0 * self.lambda_c_lemma) > 0.0:
            raise ValueError("proof threshold must be exactly 4x the lemma threshold")
        if self.glip_bound is not None and not self.glip_bound > 0:
            raise ValueError("glip bound must be positive for bounded activations")

    def to_json_dict(self) -> dict:
        return {
            "lambda_c_lemma": self.lambda_c_lemma,
            "lambda_c_proof": self.lambda_c_proof,
            "g1_lemma": self.g1_lemma,
            "g1_proof": self.g1_proof,
            "glip_bound": self.glip_bound,
            "grad_lb_coeffs": list(self.grad_lb_coeffs),
            "lap_ub_coeffs": list(self.lap_ub_coeffs),
            "divergence_verified": self.divergence_verified,
            "radius_schedule": list(self.radius_schedule),
            "high_water": self.high_water,
            "temp_s": self.temp_s,
            "min_vs_by_radius": list(self.min_vs_by_radius),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def verify_villani(
    spec: LossSpec,
    net: NetState,
    s: float = 0.01,
    radius_schedule=None,
    n_directions: int = 10,
    high_water: float = 1e6,
    seed: int = 0,
) -> VillaniReport:
    """Check that V_s diverges along rays, with radii from the schedule.

    Divergence is verified iff the analytic minorant
    (g1 r^2 - g2 r)/s - (lap_const + lap_lin r) has g1 > 0 AND every sampled
    ray dominates the minorant and crosses the high-water mark within the
    schedule. Degenerate instances (zero data or zero outer layer) have no
    logistic term, so g1 = lambda^2 > 0 certifies divergence analytically and
    ray sampling is skipped. A false report is a valid result for small
    lambda, not an error.
    """
    if s <= 0:
        raise ValueError("s must be > 0")
    if radius_schedule is None:
        radius_schedule = DEFAULT_RADIUS_SCHEDULE
    radii = tuple(float(r) for r in radius_schedule)
    prof = spec.activation
    a_norm, bx = net.a_norm, spec.data.b_x

    lc_lemma = lambda_c(prof, a_norm, bx, "lemma")
    lc_proof = lambda_c(prof, a_norm, bx, "proof")
    g1_lemma = spec.lam * spec.lam - spec.lam * lc_lemma
    g1_proof = spec.lam * spec.lam - spec.lam * lc_proof
    g1, g2 = grad_lb_coeffs(spec, net)
    lap_c, lap_l = lap_ub_coeffs(spec, net)
    try:
        glip = glip_bound(spec, net)
    except UnboundedActivationError:
        glip = None

    degenerate = bx == 0.0 or a_norm == 0.0
    min_vs = []
    if degenerate:
        verified = g1 > 0.0
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(n_directions, net.p, net.d))
        dirs /= np.linalg.norm(dirs.reshape(n_directions, -1), axis=1)[:, None, None]
        vs_grid = np.empty((len(radii), n_directions))
        for ir, r in enumerate(radii):
            for k, U in enumerate(dirs):
                vs_grid[ir, k] = v_s(spec, net.with_inner(r * U), s)
        minorants = np.array(
            [(g1 * r * r - g2 * r) / s - (lap_c + lap_l * r) for r in radii]
        )
        slack = 1e-9 * np.maximum(1.0, np.abs(minorants))
        dominated = bool(np.all(vs_grid >= (minorants - slack)[:, None]))
        # each ray must cross the mark at some scheduled radius
        crossed = bool(np.all(vs_grid.max(axis=0) >= high_water))
        min_vs = [float(m) for m in vs_grid.min(axis=1)]
        verified = (g1 > 0.0) and dominated and crossed

    return VillaniReport(
        lambda_c_lemma=lc_lemma,
        lambda_c_proof=lc_proof,
        g1_lemma=g1_lemma,
        g1_proof=g1_proof,
        glip_bound=glip,
        grad_lb_coeffs=(g1, g2),
        lap_ub_coeffs=(lap_c, lap_l),
        divergence_verified=verified,
        radius_schedule=radii,
        high_water=high_water,
        temp_s=s,
        min_vs_by_radius=tuple(min_vs),
        metadata={
            "degenerate_instance": degenerate,
            "glip_form_note": (
                "default gLip form uses first powers of B_x and ||a|| in the "
                "product terms; the per-row variant carries squares and is "
                "available via glip_bound(per_row=True)"
            ),
        },
    )
