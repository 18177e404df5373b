"""Truncated sigmoid weighting over basis indices.

    w(x) = 1 / (1 + exp(-beta * lam + beta * gamma * |x|))

is evaluated on an integer grid of positions.  The symmetric window uses
x = -c, ..., c and the one-sided window x = 0, ..., c, with c = ceil(lam), so
the grid holds K = 2c + 1 (resp. c + 1) points.  Positions beyond the grid are
the truncated part of the window: they contribute exactly zero and carry no
gradient.  The smooth factor is differentiable in ``lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

SIDES = ("symmetric", "one_sided")


@dataclass
class WindowParams:
    lambda_bar: Tensor = field(default_factory=lambda: Tensor(2.0, requires_grad=True))
    beta: float = 2.0
    gamma: float = 1.0
    side: str = "symmetric"

    def __post_init__(self):
        if not isinstance(self.lambda_bar, Tensor):
            self.lambda_bar = Tensor(float(self.lambda_bar), requires_grad=True)
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")
        if self.lambda_value < 0:
            raise ValueError("lambda_bar must be >= 0")

    @property
    def lambda_value(self):
        return float(self.lambda_bar.data)

    def clamp(self):
        """Project lambda_bar back onto [0, inf) in place."""
        if self.lambda_bar.data < 0:
            self.lambda_bar.data = np.zeros_like(self.lambda_bar.data)


def half_width(lam):
    return int(math.ceil(lam - 1e-12)) if lam > 0 else 0


def effective_order(p):
    return order_for_lambda(p.lambda_value, p.side)


def order_for_lambda(lam, side):
    c = half_width(lam)
    return 2 * c + 1 if side == "symmetric" else c + 1


def lambda_for_order(K, side):
    """Smallest lambda whose effective order is ``K``."""
    if side == "symmetric":
        if K < 1 or K % 2 == 0:
            raise ValueError(f"symmetric windows have odd order, got {K}")
        return (K - 1) / 2.0
    if K < 1:
        raise ValueError("order must be >= 1")
    return float(K - 1)


def positions(K, side):
    """Grid positions x_k for a window of ``K`` points."""
    if side == "symmetric":
        c = (K - 1) // 2
        return np.arange(-c, c + 1, dtype=np.float64)
    return np.arange(K, dtype=np.float64)


def weight_function(x, lam, beta=2.0, gamma=1.0):
    """The smooth factor on arbitrary positions (numpy, no truncation)."""
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-beta * lam + beta * gamma * np.abs(x)))


def window_values(p, K=None):
    """Differentiable weights w_1..w_K.

    ``K`` defaults to the effective order of ``p``; a layer passes its current
    coefficient count so weights and coefficients always line up.
    """
    if K is None:
        K = effective_order(p)
    x = positions(K, p.side)
    arg = ad.sub(ad.scale(p.lambda_bar, p.beta), p.beta * p.gamma * np.abs(x))
    return ad.sigmoid(arg)


def window_mass(p, K=None, dps=None):
    """Sum of the window weights.

    With ``dps`` the sum is evaluated in ``dps``-digit arithmetic (mpmath) and
    returned as an mpmath number: once beta * lam is large every weight rounds
    to 1.0 in float64 and increments of the mass drop below float resolution.
    """
    if dps is None:
        return float(np.sum(window_values(p, K).data))
    import mpmath

    if K is None:
        K = effective_order(p)
    with mpmath.workdps(dps):
        lam, beta, gamma = mpmath.mpf(p.lambda_value), mpmath.mpf(p.beta), mpmath.mpf(p.gamma)
        return mpmath.fsum(1 / (1 + mpmath.exp(-beta * lam + beta * gamma * abs(mpmath.mpf(x))))
                           for x in positions(K, p.side))
