"""Depth-2 net f(x; a, W) = a^T sigma(W x), regularized logistic risk, and
its exact first derivatives and Laplacian.

Conventions. The outer layer a (length p) is fixed; only the inner matrix W
(p x d) trains. The empirical risk is

    risk(W) = (1/n) sum_i log(1 + exp(-y_i f(x_i; a, W))) + (lam/2) ||W||_F^2

with labels y_i in {+1, -1}. All derivatives are closed form; no autodiff.
The logistic factors are routed through one stable-sigmoid kernel so that
l'(z) = -sigmoid(-z) and l''(z) = sigmoid(z) sigmoid(-z) hold bitwise and no
exp of a large positive argument is ever taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationProfile, stable_sigmoid, stable_softplus


@dataclass
class LabeledDataset:
    """Feature matrix (n x d), labels in {+1,-1}, and the exact max row norm.

    b_x is always derived from the features, never caller-supplied, so the
    invariant "every row norm <= b_x with equality attained" holds by
    construction.
    """

    features: np.ndarray
    labels: np.ndarray
    b_x: float = field(init=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if self.labels.shape != (n,):
            raise ValueError("labels must be a length-n vector")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature entries")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        self.b_x = float(np.max(np.linalg.norm(self.features, axis=1)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class NetState:
    """Fixed outer weights a (length p) and trainable inner matrix W (p x d)."""

    outer: np.ndarray
    inner: np.ndarray
    a_norm: float = field(init=False)

    def __post_init__(self):
        self.outer = np.asarray(self.outer, dtype=float)
        self.inner = np.asarray(self.inner, dtype=float)
        if self.outer.ndim != 1 or self.inner.ndim != 2:
            raise ValueError("outer must be a vector, inner a matrix")
        if self.inner.shape[0] != self.outer.shape[0]:
            raise ValueError("inner row count must equal outer length")
        if self.outer.shape[0] < 1:
            raise ValueError("need p >= 1")
        if not (np.all(np.isfinite(self.outer)) and np.all(np.isfinite(self.inner))):
            raise ValueError("non-finite weight entries")
        self.a_norm = float(np.linalg.norm(self.outer))

    @property
    def p(self) -> int:
        return self.outer.shape[0]

    @property
    def d(self) -> int:
        return self.inner.shape[1]

    def with_inner(self, inner: np.ndarray) -> "NetState":
        """Same outer, new inner, skipping revalidation of the unchanged outer.

        Training loops call this once per step; they check finiteness of the
        update themselves, so only the shape is re-checked here.
        """
        inner = np.asarray(inner, dtype=float)
        if inner.shape != self.inner.shape:
            raise ValueError("replacement inner must keep the same shape")
        new = object.__new__(NetState)
        new.outer = self.outer
        new.inner = inner
        new.a_norm = self.a_norm
        return new


@dataclass
class LossSpec:
    """Dataset + activation + Frobenius regularization strength."""

    data: LabeledDataset
    activation: ActivationProfile
    lam: float

    def __post_init__(self):
        self.lam = float(self.lam)
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError("lambda must be finite and >= 0")


def logistic_loss(z):
    """l(z) = log(1+exp(-z)), stable for any finite margin z."""
    return stable_softplus(-np.asarray(z, dtype=float))


def logistic_d1(z):
    """l'(z) = -1/(1+exp(z)) = -sigmoid(-z)."""
    return -stable_sigmoid(-np.asarray(z, dtype=float))


def logistic_d2(z):
    """l''(z) = exp(z)/(1+exp(z))^2 = sigmoid(z) sigmoid(-z)."""
    z = np.asarray(z, dtype=float)
    return stable_sigmoid(z) * stable_sigmoid(-z)


def _check_dims(spec: LossSpec, net: NetState):
    if net.inner.shape[1] != spec.data.d:
        raise ValueError(
            f"net expects d={net.inner.shape[1]} but data has d={spec.data.d}"
        )


def forward(net: NetState, activation: ActivationProfile, x) -> float:
    """f(x; a, W) = a^T sigma(W x) for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d,):
        raise ValueError(f"x must have shape ({net.d},)")
    return float(net.outer @ activation.value(net.inner @ x))


def batch_forward(spec: LossSpec, net: NetState, X: np.ndarray) -> np.ndarray:
    """f(x_i) for every row of X, shape (n,)."""
    return spec.activation.value(X @ net.inner.T) @ net.outer


def margins(spec: LossSpec, net: NetState) -> np.ndarray:
    """y_i * f(x_i) for the spec's own dataset."""
    _check_dims(spec, net)
    return spec.data.labels * batch_forward(spec, net, spec.data.features)


def risk(spec: LossSpec, net: NetState) -> float:
    """Regularized empirical logistic risk at W."""
    z = margins(spec, net)
    reg = 0.5 * spec.lam * float(np.sum(net.inner * net.inner))
    return float(np.mean(logistic_loss(z))) + reg


def per_sample_net_grad(net: NetState, activation: ActivationProfile, x) -> np.ndarray:
    """Gradient of f(x; a, W) in W: row j is a_j sigma'(w_j . x) x^T."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d,):
        raise ValueError(f"x must have shape ({net.d},)")
    d1 = activation.deriv(net.inner @ x)
    return (net.outer * d1)[:, None] * x[None, :]


def _logistic_grad(spec: LossSpec, net: NetState, idx: np.ndarray) -> np.ndarray:
    """(1/|idx|) sum over the batch of the un-regularized loss gradient.

    The sample reduction happens in the listed index order inside one matrix
    product, so full-batch and all-indices-minibatch calls agree bitwise.
    """
    X = spec.data.features[idx]
    y = spec.data.labels[idx]
    Z = X @ net.inner.T
    f = spec.activation.value(Z) @ net.outer
    coeff = logistic_d1(y * f) * y  # (b,)
    P = (coeff[:, None] * spec.activation.deriv(Z)) * net.outer[None, :]  # (b, p)
    return P.T @ X / idx.shape[0]


def minibatch_logistic_grad(spec: LossSpec, net: NetState, batch_indices) -> np.ndarray:
    """Batch average of the un-regularized logistic-term gradient only.

    This is the piece the SGD update scales by s/b; the lam * W term enters
    the update separately, outside the batch average.
    """
    _check_dims(spec, net)
    idx = np.asarray(batch_indices, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("empty batch")
    if np.any(idx < 0) or np.any(idx >= spec.data.n):
        raise ValueError("batch index out of range")
    return _logistic_grad(spec, net, idx)


def full_grad(spec: LossSpec, net: NetState) -> np.ndarray:
    """Exact gradient of risk(): logistic term average plus lam * W."""
    _check_dims(spec, net)
    idx = np.arange(spec.data.n)
    return _logistic_grad(spec, net, idx) + spec.lam * net.inner


def minibatch_grad(spec: LossSpec, net: NetState, batch_indices) -> np.ndarray:
    """(1/b) sum_{i in batch} grad(logistic term)_i + lam * W.

    Equals full_grad bitwise when the batch is the full index set in order.
    """
    _check_dims(spec, net)
    idx = np.asarray(batch_indices, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("empty batch")
    if np.any(idx < 0) or np.any(idx >= spec.data.n):
        raise ValueError("batch index out of range")
    return _logistic_grad(spec, net, idx) + spec.lam * net.inner


def exact_laplacian(spec: LossSpec, net: NetState) -> float:
    """Trace of the Hessian of risk() at W, in closed form.

    Per sample, d^2/dW_jk^2 of l(y f) is
    l''(yf) (a_j sigma'(w_j.x))^2 x_k^2 + l'(yf) y a_j sigma''(w_j.x) x_k^2;
    summing over k gives the ||x||^2 factors below, and the regularizer
    contributes lam * p * d.
    """
    _check_dims(spec, net)
    X = spec.data.features
    y = spec.data.labels
    Z = X @ net.inner.T
    d1, d2 = spec.activation.derivs(Z)
    f = spec.activation.value(Z) @ net.outer
    z = y * f
    xsq = np.sum(X * X, axis=1)
    term1 = logistic_d2(z) * ((d1 * d1) @ (net.outer * net.outer))
    term2 = logistic_d1(z) * y * (d2 @ net.outer)
    return float(np.mean((term1 + term2) * xsq)) + spec.lam * net.p * net.d


def stacked_margins(spec: LossSpec, outer: np.ndarray, Ws: np.ndarray) -> np.ndarray:
    """Margins y_i f_i for a stack of inner matrices; Ws (m,p,d) -> (m,n)."""
    X = spec.data.features
    Z = np.einsum("mpd,nd->mnp", Ws, X)
    F = spec.activation.value(Z) @ outer
    return spec.data.labels[None, :] * F


def stacked_risk(spec: LossSpec, outer: np.ndarray, Ws: np.ndarray) -> np.ndarray:
    """risk() for every inner matrix in the stack, shape (m,)."""
    zs = stacked_margins(spec, outer, Ws)
    reg = 0.5 * spec.lam * np.sum(Ws * Ws, axis=(1, 2))
    return np.mean(logistic_loss(zs), axis=1) + reg


def stacked_grad(spec: LossSpec, outer: np.ndarray, Ws: np.ndarray) -> np.ndarray:
    """full_grad() for every inner matrix in the stack, shape (m,p,d)."""
    X = spec.data.features
    y = spec.data.labels
    Z = np.einsum("mpd,nd->mnp", Ws, X)
    F = spec.activation.value(Z) @ outer
    coeff = logistic_d1(y[None, :] * F) * y[None, :]  # (m, n)
    P = coeff[:, :, None] * spec.activation.deriv(Z) * outer[None, None, :]
    return np.einsum("mnp,nd->mpd", P, X) / X.shape[0] + spec.lam * Ws


def stacked_laplacian(spec: LossSpec, outer: np.ndarray, Ws: np.ndarray) -> np.ndarray:
    """exact_laplacian() for every inner matrix in the stack, shape (m,)."""
    X = spec.data.features
    y = spec.data.labels
    Z = np.einsum("mpd,nd->mnp", Ws, X)
    d1, d2 = spec.activation.derivs(Z)
    F = spec.activation.value(Z) @ outer
    z = y[None, :] * F
    xsq = np.sum(X * X, axis=1)
    term1 = logistic_d2(z) * ((d1 * d1) @ (outer * outer))
    term2 = logistic_d1(z) * y[None, :] * (d2 @ outer)
    p, d = Ws.shape[1], Ws.shape[2]
    return np.mean((term1 + term2) * xsq[None, :], axis=1) + spec.lam * p * d


def accuracy(spec: LossSpec, net: NetState, data: LabeledDataset | None = None) -> float:
    """0-1 accuracy of sign(f) against the labels; f == 0 counts as an error."""
    ds = spec.data if data is None else data
    f = batch_forward(spec, net, ds.features)
    return float(np.mean(ds.labels * f > 0.0))
