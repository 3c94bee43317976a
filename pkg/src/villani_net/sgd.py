"""Constant step-size minibatch SGD on the regularized logistic risk.

The update is
    W_{k+1} = W_k - (s/b) sum_{i in B_k} grad(logistic term)_i - s * lam * W_k
with the regularizer entering once, outside the batch average. Batches are
drawn without replacement within each epoch, reshuffled per epoch from the
seeded stream, so fixed seeds give bitwise-identical trajectories.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import UnboundedActivationError, glip_bound
from .net_loss import (
    LossSpec,
    NetState,
    full_grad,
    logistic_d1,
    minibatch_logistic_grad,
    risk,
)

RISK_ABORT = 1e12

INIT_KINDS = ("gaussian_std", "gaussian_scaled")


class DivergenceError(RuntimeError):
    """Raised when iterates go non-finite or the risk exceeds the abort cap."""


@dataclass(frozen=True)
class InitSpec:
    """Weight initialization: i.i.d. normal entries, unit or custom scale."""

    kind: str = "gaussian_std"
    sigma_w: float = 1.0

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"init kind must be one of {INIT_KINDS}")
        if not (self.sigma_w > 0 and math.isfinite(self.sigma_w)):
            raise ValueError("sigma_w must be positive and finite")

    @property
    def scale(self) -> float:
        return 1.0 if self.kind == "gaussian_std" else self.sigma_w


def init_weights(init: InitSpec, p: int, d: int, seed) -> np.ndarray:
    """Sample the initial inner matrix; bitwise deterministic per seed."""
    if p < 1 or d < 1:
        raise ValueError("need p >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    return init.scale * rng.standard_normal((p, d))


@dataclass(frozen=True)
class SgdConfig:
    """Step size, batch size, horizon (steps or epochs), seed, and init.

    Exactly one of num_steps / epochs is set; epochs convert to
    num_steps = epochs * ceil(n / batch_b). risk/grad-norm records are taken
    at step 0, every record_every-th step, and the final step.
    """

    step_s: float
    batch_b: int
    num_steps: int | None = None
    epochs: int | None = None
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    record_every: int = 1

    def __post_init__(self):
        if not (self.step_s >= 0 and math.isfinite(self.step_s)):
            raise ValueError("step_s must be finite and >= 0")
        if self.batch_b < 1:
            raise ValueError("batch_b must be >= 1")
        if (self.num_steps is None) == (self.epochs is None):
            raise ValueError("set exactly one of num_steps or epochs")
        horizon = self.num_steps if self.num_steps is not None else self.epochs
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def steps_for(self, n: int) -> int:
        if self.num_steps is not None:
            return self.num_steps
        return self.epochs * math.ceil(n / self.batch_b)


@dataclass
class Trajectory:
    """Recorded (step, time, risk, grad_norm, w_fro) rows plus the final state."""

    steps: np.ndarray
    times: np.ndarray
    risks: np.ndarray
    grad_norms: np.ndarray
    w_fros: np.ndarray
    final: NetState
    step_s: float
    notes: list

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,time,risk,grad_norm,w_fro\n")
            for k, t, r, g, w in zip(
                self.steps, self.times, self.risks, self.grad_norms, self.w_fros
            ):
                fh.write(
                    f"{int(k)},{float(t)!r},{float(r)!r},{float(g)!r},{float(w)!r}\n"
                )


def sgd_step(spec: LossSpec, net: NetState, cfg: SgdConfig, batch) -> NetState:
    """One SGD update; the lam term enters once, outside the batch average."""
    g_log = minibatch_logistic_grad(spec, net, batch)
    w_new = net.inner - cfg.step_s * g_log - (cfg.step_s * spec.lam) * net.inner
    if not np.all(np.isfinite(w_new)):
        raise DivergenceError("non-finite weights after SGD update")
    return net.with_inner(w_new)


def _epoch_batches(n: int, b: int, rng):
    """Without-replacement batches, reshuffled each epoch; final batch may be short."""
    while True:
        perm = rng.permutation(n)
        for i in range(0, n, b):
            yield perm[i : i + b]


def run_sgd(spec: LossSpec, cfg: SgdConfig, outer: np.ndarray) -> Trajectory:
    """Train from a fresh init; records exact risk/grad-norm along the way.

    The outer layer is fixed throughout; only the inner matrix updates. Init
    and batch shuffling draw from independent streams spawned off cfg.seed,
    so the whole run is reproducible bitwise.
    """
    n = spec.data.n
    if cfg.batch_b > n:
        raise ValueError(f"batch_b={cfg.batch_b} exceeds n={n}")
    outer = np.asarray(outer, dtype=float)
    p = outer.shape[0]
    ss_init, ss_batch = np.random.SeedSequence(cfg.seed).spawn(2)
    net = NetState(outer=outer, inner=init_weights(cfg.init, p, spec.data.d, ss_init))

    notes = []
    if spec.activation.bounded:
        try:
            cap = 1.0 / glip_bound(spec, net)
            if cfg.step_s > cap:
                msg = f"step_s={cfg.step_s} exceeds smoothness cap 1/gLip={cap:.6g}"
                notes.append(msg)
                warnings.warn(msg)
        except UnboundedActivationError:  # pragma: no cover - bounded guard above
            pass

    total = cfg.steps_for(n)
    batches = _epoch_batches(n, cfg.batch_b, np.random.default_rng(ss_batch))
    rec_steps, rec_risks, rec_gnorms, rec_wfros = [], [], [], []

    def record(k, state):
        r = risk(spec, state)
        if not math.isfinite(r) or r > RISK_ABORT:
            raise DivergenceError(f"risk {r} at step {k} exceeds abort threshold")
        rec_steps.append(k)
        rec_risks.append(r)
        rec_gnorms.append(float(np.linalg.norm(full_grad(spec, state))))
        rec_wfros.append(float(np.linalg.norm(state.inner)))

    record(0, net)
    # inlined sgd_step body (keep in lockstep with it): at tiny widths the
    # per-step NetState/validation overhead dominates the arithmetic
    x_all, y_all = spec.data.features, spec.data.labels
    act, step_lam = spec.activation, cfg.step_s * spec.lam
    w = net.inner
    for k in range(1, total + 1):
        idx = next(batches)
        xb = x_all[idx]
        z = xb @ w.T
        f = act.value(z) @ outer
        yb = y_all[idx]
        coeff = logistic_d1(yb * f) * yb
        p_mat = (coeff[:, None] * act.deriv(z)) * outer[None, :]
        g_log = p_mat.T @ xb / idx.shape[0]
        w = w - cfg.step_s * g_log - step_lam * w
        if not np.all(np.isfinite(w)):
            raise DivergenceError("non-finite weights after SGD update")
        if k % cfg.record_every == 0 or k == total:
            net = net.with_inner(w)
            record(k, net)
    net = net.with_inner(w)

    steps = np.array(rec_steps, dtype=int)
    return Trajectory(
        steps=steps,
        times=cfg.step_s * steps.astype(float),
        risks=np.array(rec_risks),
        grad_norms=np.array(rec_gnorms),
        w_fros=np.array(rec_wfros),
        final=net,
        step_s=cfg.step_s,
        notes=notes,
    )


def excess_risk_curve(trajectories, global_min: float):
    """Ensemble mean of (risk - global_min) at each recorded step.

    All trajectories must share the same recording schedule. Returns
    (times, mean_excess) arrays; with a correct global_min the curve stays
    above -1e-9 (estimator noise only).
    """
    trajs = list(trajectories)
    if not trajs:
        raise ValueError("empty ensemble")
    base = trajs[0].steps
    for t in trajs[1:]:
        if not np.array_equal(t.steps, base):
            raise ValueError("trajectories have mismatched recording schedules")
    excess = np.mean([t.risks - global_min for t in trajs], axis=0)
    return trajs[0].times, excess
