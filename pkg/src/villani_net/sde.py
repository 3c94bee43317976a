"""Euler-Maruyama simulation of the training diffusion
    dW(t) = -grad risk(W(t)) dt + sqrt(s) dB(t)
and empirical linear-rate estimation from ensemble mean-risk decay.

Ensembles evolve in lockstep as one (m, p, d) block with a single seeded
noise stream per step, which is bitwise reproducible and orders of magnitude
faster than per-trajectory loops; the block update is mathematically
identical to m independent chains.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import UnboundedActivationError, glip_bound
from .net_loss import LossSpec, NetState, full_grad, stacked_grad, stacked_risk
from .sgd import DivergenceError, InitSpec


@dataclass(frozen=True)
class SdeConfig:
    """Diffusion temperature, integrator step, horizon, ensemble size, seed."""

    temp_s: float
    dt: float
    horizon_t: float
    ensemble_m: int = 1
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    record_every: int = 1

    def __post_init__(self):
        if not (self.temp_s >= 0 and math.isfinite(self.temp_s)):
            raise ValueError("temp_s must be finite and >= 0")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if not (self.horizon_t > 0 and self.dt <= self.horizon_t):
            raise ValueError("need 0 < dt <= horizon_t")
        if self.ensemble_m < 1:
            raise ValueError("ensemble_m must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def num_steps(self) -> int:
        return max(1, int(round(self.horizon_t / self.dt)))


@dataclass
class EnsembleSeries:
    """Ensemble mean risk curve with per-time standard errors.

    final_inners stacks the terminal W of every trajectory, shape (m, p, d),
    for stationary-law diagnostics.
    """

    t: np.ndarray
    mean_risk: np.ndarray
    stderr: np.ndarray
    m: int
    final_inners: np.ndarray
    notes: list

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,mean_risk,stderr,m\n")
            for t, r, e in zip(self.t, self.mean_risk, self.stderr):
                fh.write(f"{float(t)!r},{float(r)!r},{float(e)!r},{self.m}\n")


def em_step(spec: LossSpec, net: NetState, temp_s: float, dt: float, noise) -> NetState:
    """W <- W - dt * grad risk(W) + sqrt(temp_s * dt) * noise."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != net.inner.shape:
        raise ValueError("noise must match the inner weight shape")
    w_new = net.inner - dt * full_grad(spec, net) + math.sqrt(temp_s * dt) * noise
    if not np.all(np.isfinite(w_new)):
        raise DivergenceError("non-finite weights after EM step")
    return net.with_inner(w_new)


def default_dt(spec: LossSpec, net: NetState) -> float:
    """min(1e-3, 0.1 / gLip bound) when the bound exists, else 1e-3."""
    try:
        return min(1e-3, 0.1 / glip_bound(spec, net))
    except UnboundedActivationError:
        return 1e-3


def run_ensemble(spec: LossSpec, cfg: SdeConfig, outer: np.ndarray) -> EnsembleSeries:
    """Integrate m trajectories of the diffusion and record mean risk.

    Recording happens at t = 0, every record_every-th step, and the final
    step. Fixed seed and m give a bitwise-identical series.
    """
    outer = np.asarray(outer, dtype=float)
    p, d = outer.shape[0], spec.data.d
    m = cfg.ensemble_m
    ss_init, ss_noise = np.random.SeedSequence(cfg.seed).spawn(2)
    Ws = cfg.init.scale * np.random.default_rng(ss_init).standard_normal((m, p, d))
    noise_rng = np.random.default_rng(ss_noise)

    notes = []
    if spec.activation.bounded:
        probe = NetState(outer=outer, inner=np.zeros((p, d)))
        cap = glip_bound(spec, probe)
        if cfg.dt * cap > 1.0:
            msg = f"dt={cfg.dt} violates dt * gLip <= 1 (gLip bound {cap:.6g})"
            notes.append(msg)
            warnings.warn(msg)

    root = math.sqrt(cfg.temp_s * cfg.dt)
    ts, means, errs = [], [], []

    def record(k):
        risks = stacked_risk(spec, outer, Ws)
        if not np.all(np.isfinite(risks)):
            raise DivergenceError(f"non-finite risk at step {k}")
        ts.append(k * cfg.dt)
        means.append(float(np.mean(risks)))
        errs.append(float(np.std(risks, ddof=1) / math.sqrt(m)) if m > 1 else 0.0)

    record(0)
    total = cfg.num_steps
    for k in range(1, total + 1):
        Ws = Ws - cfg.dt * stacked_grad(spec, outer, Ws) + root * noise_rng.standard_normal((m, p, d))
        if not np.all(np.isfinite(Ws)):
            raise DivergenceError(f"non-finite weights at step {k}")
        if k % cfg.record_every == 0 or k == total:
            record(k)

    return EnsembleSeries(
        t=np.array(ts),
        mean_risk=np.array(means),
        stderr=np.array(errs),
        m=m,
        final_inners=Ws,
        notes=notes,
    )


def fit_rate(series: EnsembleSeries, plateau: float | None = None, window_frac: float = 0.05):
    """Exponential decay rate of the excess mean risk.

    Fits a least-squares line to log(mean_risk - plateau) against t over the
    pre-plateau window (points whose excess is at least window_frac of the
    initial excess). plateau defaults to the mean of the last 10% of the
    series; pass a grid-scan minimum instead when one is available. Returns
    (lambda_hat, r2) with lambda_hat = -slope.
    """
    t = np.asarray(series.t, dtype=float)
    r = np.asarray(series.mean_risk, dtype=float)
    if plateau is None:
        tail = max(1, int(0.1 * len(r)))
        plateau = float(np.mean(r[-tail:]))
    excess = r - plateau
    if excess[0] <= 0:
        raise ValueError("non-positive initial excess; nothing to fit")
    keep = excess >= window_frac * excess[0]
    if int(np.sum(keep)) < 10:
        raise ValueError("pre-plateau window too short (< 10 points)")
    x = t[keep]
    yv = np.log(excess[keep])
    slope, intercept = np.polyfit(x, yv, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((yv - pred) ** 2))
    ss_tot = float(np.sum((yv - np.mean(yv)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(r2)
