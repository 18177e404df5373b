"""Coefficient remapping when a basis changes size.

All remaps act on the last axis of a coefficient array, so a whole layer block
``theta[q, p, k]`` is remapped in one call.

pinv
    Collocation: find new coefficients whose expansion matches the old one
    at a set of evaluation points, theta_new = pinv(Phi_new) @ Phi_old @ theta_old.
linear
    Linear interpolation of coefficient sequences on the fixed reference
    interval (piecewise-activation bases only); the end coefficients are copied.
lazy
    Keep shared coefficients, drop the surplus on shrink, draw new ones from a
    zero-mean Gaussian on growth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis as B
from .errors import NumericError, UnsupportedError

SCHEMES = ("pinv", "linear", "lazy")
RCOND = 1e-10


@dataclass
class RemapProblem:
    family: B.BasisFamily
    old_coeffs: np.ndarray
    new_K: int
    slope: float = 0.25

    def __post_init__(self):
        self.old_coeffs = np.asarray(self.old_coeffs, dtype=np.float64)
        if self.old_K < 1 or self.new_K < 1:
            raise ValueError("basis counts must be >= 1")

    @property
    def old_K(self):
        return self.old_coeffs.shape[-1]


def collocation_points(family, old_K, new_K):
    """Where old and new expansions are required to agree.

    Piecewise bases use the new knots.  Chebyshev uses Gauss-Chebyshev nodes
    and Fourier a uniform periodic grid, both sized so that the discrete inner
    products stay orthogonal; growth then reduces to zero-padding and shrinking
    to truncation.
    """
    if family.kind == "piecewise":
        return B.knots(new_K)
    n = max(old_K, new_K)
    if family.kind == "chebyshev":
        return B.chebyshev_gauss_points(n)
    m = 2 * n + 1
    return -1.0 + 2.0 * np.arange(m) / m


def pinv_transfer(family, old_K, new_K, slope=0.25, points=None):
    """Matrix T (new_K x old_K) with theta_new = T @ theta_old.

    Equal sizes give the identity: a rank-deficient design (relu(x - 1) is
    zero on the whole interval) would otherwise drop that coefficient.
    """
    if old_K == new_K and points is None:
        return np.eye(new_K)
    if points is None:
        points = collocation_points(family, old_K, new_K)
    phi_new = B.design_matrix(family, new_K, points, slope)
    phi_old = B.design_matrix(family, old_K, points, slope)
    if not (np.all(np.isfinite(phi_new)) and np.all(np.isfinite(phi_old))):
        raise NumericError("non-finite design matrix")
    return np.linalg.pinv(phi_new, rcond=RCOND) @ phi_old


def linear_transfer(old_K, new_K):
    """Interpolation matrix for coefficient sequences on a fixed interval.

    New index k (0-based) sits at s = k (n - 1) / (n' - 1) on the old index
    axis, j = floor(s), and theta'_k = (1 - s + j) theta_j + (s - j) theta_{j+1}.
    """
    T = np.zeros((new_K, old_K))
    if old_K == 1:
        T[:, 0] = 1.0
        return T
    if new_K == 1:
        T[0, 0] = 1.0
        return T
    s = np.arange(new_K) * (old_K - 1) / (new_K - 1)
    j = np.minimum(np.floor(s).astype(int), old_K - 2)
    frac = s - j
    rows = np.arange(new_K)
    T[rows, j] = 1.0 - frac
    T[rows, j + 1] += frac
    T[0, :] = 0.0
    T[0, 0] = 1.0
    T[-1, :] = 0.0
    T[-1, -1] = 1.0
    return T


def _apply(T, coeffs):
    return np.asarray(coeffs, dtype=np.float64) @ T.T


def pinv_remap(p):
    T = pinv_transfer(p.family, p.old_K, p.new_K, p.slope)
    out = _apply(T, p.old_coeffs)
    if not np.all(np.isfinite(out)):
        raise NumericError("pseudo-inverse remap produced non-finite coefficients")
    return out


def linear_remap(p):
    if p.family.kind != "piecewise":
        raise UnsupportedError("linear interpolation applies to piecewise-activation bases only")
    return _apply(linear_transfer(p.old_K, p.new_K), p.old_coeffs)


def lazy_remap(p, prior_sigma, rng):
    """Truncate on shrink; on growth append N(0, prior_sigma^2) draws."""
    old = p.old_coeffs
    if p.new_K <= p.old_K:
        return old[..., : p.new_K].copy()
    extra_shape = old.shape[:-1] + (p.new_K - p.old_K,)
    if prior_sigma == 0:
        extra = np.zeros(extra_shape)
    else:
        extra = rng.normal(0.0, prior_sigma, size=extra_shape)
    return np.concatenate([old, extra], axis=-1)


def remap(scheme, p, prior_sigma=0.0, rng=None):
    if scheme == "pinv":
        return pinv_remap(p)
    if scheme == "linear":
        return linear_remap(p)
    if scheme == "lazy":
        return lazy_remap(p, prior_sigma, rng if rng is not None else np.random.default_rng(0))
    raise ValueError(f"unknown interpolation scheme {scheme!r}; expected one of {SCHEMES}")
