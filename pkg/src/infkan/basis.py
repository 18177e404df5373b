"""Generative basis functions on [-1, 1] and their design matrices.

Three families are available:

* ``piecewise`` -- shifted activations g(x - t_k) on a uniform knot grid
  t_1 = -1, ..., t_n = 1 (g is relu, leaky_relu, prelu, silu, gelu or relu6);
* ``chebyshev`` -- type-I Chebyshev polynomials, index k -> T^{k-1};
* ``fourier`` -- real Fourier functions with period 2: a constant 1/sqrt(2)
  followed by alternating sin(pi m x)/sqrt(2), cos(pi m x)/sqrt(2) with
  m = ceil((k-1)/2).

Indices k are 1-based throughout, matching the coefficient layout of a layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, UnsupportedError

ACTIVATIONS = ("relu", "leaky_relu", "prelu", "silu", "gelu", "relu6")
FAMILIES = ("piecewise", "chebyshev", "fourier")
_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class BasisFamily:
    kind: str = "piecewise"
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown basis family {self.kind!r}; expected one of {FAMILIES}")
        if self.kind == "piecewise" and self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")

    @property
    def requires_interp(self):
        # orthogonal series share coefficients across orders
        return self.kind == "piecewise"

    @property
    def default_side(self):
        return "symmetric" if self.kind == "piecewise" else "one_sided"

    def __str__(self):
        return f"piecewise:{self.activation}" if self.kind == "piecewise" else self.kind

    @classmethod
    def parse(cls, text):
        """Parse ``"chebyshev"``, ``"fourier"``, ``"relu"`` or ``"piecewise:gelu"``."""
        text = text.strip().lower()
        if text in ("chebyshev", "fourier"):
            return cls(kind=text)
        if text.startswith("piecewise"):
            _, _, act = text.partition(":")
            return cls(kind="piecewise", activation=act or "relu")
        if text in ACTIVATIONS:
            return cls(kind="piecewise", activation=text)
        raise ValueError(f"cannot parse basis family {text!r}")


def knots(n):
    """Uniform knots on [-1, 1]; a single basis sits at the left end."""
    if n < 1:
        raise ValueError("basis count must be >= 1")
    if n == 1:
        return np.array([-1.0])
    return np.linspace(-1.0, 1.0, n)


def chebyshev_gauss_points(n):
    """Roots of T^n, i.e. the Gauss-Chebyshev nodes, in increasing order."""
    j = np.arange(1, n + 1)
    return np.sort(np.cos((2 * j - 1) * np.pi / (2 * n)))


def default_points(family, n):
    """Collocation coordinates for a basis of size ``n``."""
    return knots(n) if family.kind == "piecewise" else chebyshev_gauss_points(n)


# --- numpy evaluation ---------------------------------------------------------------


def _activation_np(name, z, slope=0.25):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0, z, ad.LEAKY_SLOPE * z)
    if name == "prelu":
        return np.where(z > 0, z, slope * z)
    if name == "silu":
        return z / (1.0 + np.exp(-z))
    if name == "gelu":
        return 0.5 * z * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (z + 0.044715 * z ** 3)))
    if name == "relu6":
        return np.clip(z, 0.0, 6.0)
    raise ValueError(name)


def _chebyshev_np(x, n):
    """T^0..T^{n-1} and their derivatives by the three-term recurrence."""
    vals = np.empty(x.shape + (n,))
    ders = np.empty(x.shape + (n,))
    vals[..., 0] = 1.0
    ders[..., 0] = 0.0
    if n > 1:
        vals[..., 1] = x
        ders[..., 1] = 1.0
    for k in range(1, n - 1):
        vals[..., k + 1] = 2 * x * vals[..., k] - vals[..., k - 1]
        ders[..., k + 1] = 2 * vals[..., k] + 2 * x * ders[..., k] - ders[..., k - 1]
    return vals, ders


def _fourier_layout(n):
    k = np.arange(1, n + 1)
    m = np.ceil((k - 1) / 2.0)
    is_sin = (k - 1) % 2 == 1
    return m, is_sin


def _fourier_np(x, n):
    m, is_sin = _fourier_layout(n)
    arg = np.pi * x[..., None] * m
    s, c = np.sin(arg), np.cos(arg)
    vals = np.where(is_sin, s, c) * _INV_SQRT2
    ders = np.where(is_sin, c, -s) * (np.pi * m * _INV_SQRT2)
    return vals, ders


def basis_values(family, n, x, slope=0.25):
    """phi^n_k(x) for k = 1..n as a numpy array of shape ``x.shape + (n,)``."""
    x = np.asarray(x, dtype=np.float64)
    if family.kind == "chebyshev":
        return _chebyshev_np(x, n)[0]
    if family.kind == "fourier":
        return _fourier_np(x, n)[0]
    return _activation_np(family.activation, x[..., None] - knots(n), slope)


# --- differentiable evaluation ---------------------------------------------------


def _series_op(x, n, fn, what):
    vals, ders = fn(x.data, n)

    def bw(g):
        return (np.sum(g * ders, axis=-1),)

    return ad._make(vals, (x,), bw, what)


def _activation(name, z, slope):
    if name == "prelu":
        return ad.prelu(z, slope if slope is not None else Tensor(0.25))
    return {
        "relu": ad.relu,
        "leaky_relu": ad.leaky_relu,
        "silu": ad.silu,
        "gelu": ad.gelu,
        "relu6": ad.relu6,
    }[name](z)


def expand(family, n, x, slope=None):
    """Differentiable basis expansion: Tensor ``x`` -> Tensor ``x.shape + (n,)``.

    ``slope`` is the learnable PReLU slope (a scalar Tensor), ignored by the
    other activations.
    """
    x = ad.as_tensor(x)
    if n < 1:
        raise ValueError("basis count must be >= 1")
    if family.kind == "chebyshev":
        return _series_op(x, n, _chebyshev_np, "chebyshev")
    if family.kind == "fourier":
        return _series_op(x, n, _fourier_np, "fourier")
    z = ad.sub(ad.reshape(x, x.shape + (1,)), knots(n))
    return _activation(family.activation, z, slope)


def eval_basis(family, n, k, x, slope=None):
    """phi^n_k(x) elementwise for a single 1-based index ``k``."""
    if not 1 <= k <= n:
        raise IndexError(f"basis index {k} outside [1, {n}]")
    full = expand(family, n, x, slope)
    return ad.index_select(full, [k - 1], axis=-1).reshape(ad.as_tensor(x).shape)


def design_matrix(family, n, points, slope=0.25):
    """Matrix with entry (i, j) = phi^n_j(points_i)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 1:
        raise ShapeError("evaluation points must be a 1-d array")
    return basis_values(family, n, points, slope)


# --- orthogonality ------------------------------------------------------------------


def gram_matrix(family, n, quadrature_points=None):
    """Weighted inner products <phi_j, phi_k> by quadrature.

    Chebyshev uses Gauss-Chebyshev quadrature, which absorbs the weight
    1/sqrt(1 - x^2); Fourier uses the trapezoid rule on a uniform grid
    (at least 4096 points).
    """
    if family.kind == "piecewise":
        raise UnsupportedError("piecewise activation bases carry no orthogonality property")
    if n < 1:
        raise ValueError("n must be >= 1")
    if family.kind == "chebyshev":
        m = quadrature_points or 2 * n
        if m < n:
            raise ValueError("Gauss-Chebyshev needs at least n nodes to be exact")
        x = chebyshev_gauss_points(m)
        w = np.full(m, np.pi / m)
    else:
        m = max(quadrature_points or 4096, 4096)
        x = np.linspace(-1.0, 1.0, m + 1)
        w = np.full(m + 1, 2.0 / m)
        w[[0, -1]] *= 0.5
    phi = basis_values(family, n, x)
    return phi.T @ (w[:, None] * phi)


def check_orthogonality(family, n, quadrature_points=None):
    """Largest off-diagonal magnitude of the Gram matrix."""
    if n < 2:
        raise ValueError("orthogonality needs n >= 2")
    g = gram_matrix(family, n, quadrature_points)
    off = g - np.diag(np.diag(g))
    return float(np.max(np.abs(off)))
