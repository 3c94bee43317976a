"""Supported activation functions with their certified analytic constants.

Each activation comes packaged with the constants the rest of the toolkit
consumes: the sup-norm bound ``b_sigma``, the Lipschitz constant, and the
first/second derivative sup bounds. For the sigmoid family the tight
derivative bounds are beta/4 and beta^2/(6*sqrt(3)); for tanh they are 1 and
4/(3*sqrt(3)); softplus_beta is 1-Lipschitz with second derivative bounded by
beta/4 but is unbounded, so its ``b_sigma`` is +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGMOID = "sigmoid"
TANH = "tanh"
SOFTPLUS = "softplus"

_KINDS = (SIGMOID, TANH, SOFTPLUS)


def stable_sigmoid(x):
    """1/(1+exp(-x)) computed without overflow for any finite x.

    exp is only ever taken of a non-positive argument, so the result is exact
    to rounding even for |x| ~ 1e3.
    """
    x = np.asarray(x, dtype=float)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def stable_softplus(x):
    """log(1+exp(x)) via log1p with linearization for large x."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


@dataclass(frozen=True)
class ActivationProfile:
    """An activation together with its certified constants.

    Fields mirror what the bounds need: ``b_sigma`` = sup|sigma| (may be
    +inf), ``lipschitz_l`` = Lipschitz constant of sigma, ``m_d`` = sup|sigma'|,
    ``m_d_prime`` = sup|sigma''|, ``c0`` = sigma(0). Instances are immutable
    and safe to share.
    """

    kind: str
    beta: float
    b_sigma: float
    lipschitz_l: float
    m_d: float
    m_d_prime: float
    c0: float

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.b_sigma)

    def value(self, x):
        """Evaluate sigma(x) elementwise; stable up to |x| ~ 1e3."""
        if self.kind == SIGMOID:
            return stable_sigmoid(self.beta * np.asarray(x, dtype=float))
        if self.kind == TANH:
            return np.tanh(np.asarray(x, dtype=float))
        # softplus_beta(x) = log(1+exp(beta x))/beta
        return stable_softplus(self.beta * np.asarray(x, dtype=float)) / self.beta

    def derivs(self, x):
        """Return (sigma'(x), sigma''(x)) elementwise, in closed form."""
        x = np.asarray(x, dtype=float)
        if self.kind == SIGMOID:
            s = stable_sigmoid(self.beta * x)
            d1 = self.beta * s * (1.0 - s)
            d2 = self.beta * self.beta * s * (1.0 - s) * (1.0 - 2.0 * s)
            return d1, d2
        if self.kind == TANH:
            t = np.tanh(x)
            sech2 = 1.0 - t * t
            return sech2, -2.0 * t * sech2
        s = stable_sigmoid(self.beta * x)
        return s, self.beta * s * (1.0 - s)

    def deriv(self, x):
        """sigma'(x) alone, skipping the second-derivative arithmetic."""
        x = np.asarray(x, dtype=float)
        if self.kind == SIGMOID:
            s = stable_sigmoid(self.beta * x)
            return self.beta * s * (1.0 - s)
        if self.kind == TANH:
            t = np.tanh(x)
            return 1.0 - t * t
        return stable_sigmoid(self.beta * x)

    def spec_string(self) -> str:
        if self.kind == TANH:
            return TANH
        return f"{self.kind}:{self.beta:g}"


def activation_profile(kind: str, beta: float = 1.0) -> ActivationProfile:
    """Build the profile with tight constants for the requested activation."""
    if kind not in _KINDS:
        raise ValueError(f"unknown activation kind {kind!r}; expected one of {_KINDS}")
    if kind != TANH and not (beta > 0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a positive finite real, got {beta}")
    if kind == SIGMOID:
        return ActivationProfile(
            kind=SIGMOID,
            beta=beta,
            b_sigma=1.0,
            lipschitz_l=beta / 4.0,
            m_d=beta / 4.0,
            m_d_prime=beta * beta / (6.0 * math.sqrt(3.0)),
            c0=0.5,
        )
    if kind == TANH:
        return ActivationProfile(
            kind=TANH,
            beta=1.0,
            b_sigma=1.0,
            lipschitz_l=1.0,
            m_d=1.0,
            m_d_prime=4.0 / (3.0 * math.sqrt(3.0)),
            c0=0.0,
        )
    return ActivationProfile(
        kind=SOFTPLUS,
        beta=beta,
        b_sigma=math.inf,
        lipschitz_l=1.0,
        m_d=1.0,
        m_d_prime=beta / 4.0,
        c0=math.log(2.0) / beta,
    )


def parse_activation(text: str) -> ActivationProfile:
    """Parse a config string like "sigmoid:1.0", "tanh", "softplus:4.0"."""
    name, _, rest = text.strip().partition(":")
    name = name.lower()
    if name == TANH:
        if rest:
            raise ValueError("tanh takes no parameter")
        return activation_profile(TANH)
    if name not in (SIGMOID, SOFTPLUS):
        raise ValueError(f"unknown activation {text!r}")
    beta = float(rest) if rest else 1.0
    return activation_profile(name, beta)
