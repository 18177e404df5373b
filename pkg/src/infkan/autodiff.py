"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Every differentiable operation produces a new :class:`Tensor` holding a
reference to its parents and a closure mapping the output gradient to the
parent gradients.  :func:`backward` walks that record in reverse topological
order, accumulating (summing) gradients on leaves.  The tape is released once
``backward`` has run.

Elementwise binary ops follow numpy broadcasting; gradients are summed back to
the operand shapes.  No operation mutates its inputs.

GELU uses the tanh approximation

    gelu(x) = 0.5 x (1 + tanh(c (x + 0.044715 x^3))),   c = sqrt(2/pi)

and its gradient is the exact derivative of that formula.
"""

from __future__ import annotations

import contextlib
import threading

import numpy as np
from scipy import special

from .errors import DataError, NumericError, ShapeError

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "no_grad",
    "grad_enabled",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "scale",
    "matmul",
    "sum",
    "mean",
    "abs",
    "exp",
    "log",
    "sqrt",
    "power",
    "tanh",
    "sigmoid",
    "cos",
    "sin",
    "lgamma",
    "relu",
    "leaky_relu",
    "prelu",
    "silu",
    "gelu",
    "relu6",
    "clamp",
    "concat",
    "stack",
    "index_select",
    "reshape",
    "transpose",
    "log_softmax",
    "loss_cross_entropy",
    "loss_gaussian_nll",
    "numerical_grad",
    "gradcheck",
]

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715
LEAKY_SLOPE = 0.01

_state = threading.local()


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording in the current thread."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    """Dense float64 array that may participate in a computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite value in tensor {name or ''}".strip())
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    # --- basic properties -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=6)}{rg})"

    def __len__(self):
        return len(self.data)

    # --- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, what):
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{what} produced a non-finite value")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._parents = ()
    out._backward = None
    out.requires_grad = False
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _broadcast_shape(a, b, what):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# --- elementwise binary ------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        return (_unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(g * ad, bd.shape) if b.requires_grad else None)

    return _make(ad * bd, (a, b), bw, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    if np.any(b.data == 0):
        raise NumericError("division by zero")
    ad, bd = a.data, b.data
    out = ad / bd

    def bw(g):
        return (_unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None)

    return _make(out, (a, b), bw, "div")


def neg(a):
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def scale(a, c):
    """Multiply by a constant python/numpy scalar."""
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        return (g @ bd.T if a.requires_grad else None,
                ad.T @ g if b.requires_grad else None)

    return _make(ad @ bd, (a, b), bw, "matmul")


# --- reductions & shape ----------------------------------------------------------


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    out = []
    for ax in axis:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-d tensor")
        out.append(ax % ndim)
    return tuple(out)


def _expand_reduced(g, shape, axes, keepdims):
    if not keepdims:
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    shape = a.shape
    out = np.sum(a.data, axis=axes, keepdims=keepdims)
    return _make(np.asarray(out, dtype=np.float64), (a,),
                 lambda g: (_expand_reduced(g, shape, axes, keepdims).copy(),), "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    if count == 0:
        raise ShapeError("mean over an empty axis")
    shape = a.shape
    out = np.mean(a.data, axis=axes, keepdims=keepdims)
    return _make(np.asarray(out, dtype=np.float64), (a,),
                 lambda g: (_expand_reduced(g, shape, axes, keepdims) / count,), "mean")


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {a.shape} into {shape}") from None
    orig = a.shape
    return _make(out, (a,), lambda g: (g.reshape(orig),), "reshape")


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),), "transpose")


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tensors, bw, "concat")


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack of an empty list")
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"stack: {exc}") from None
    n = len(tensors)

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return _make(out, tensors, bw, "stack")


def index_select(a, indices, axis=0):
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    n = a.shape[axis]
    if idx.size and (idx.min() < -n or idx.max() >= n):
        raise IndexError(f"index out of range for axis of size {n}")
    shape = a.shape

    def bw(g):
        full = np.zeros(shape)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return (full,)

    return _make(np.take(a.data, idx, axis=axis), (a,), bw, "index_select")


# --- elementwise unary -------------------------------------------------------------


def _unary(a, value, dvalue, what):
    a = as_tensor(a)
    return _make(value, (a,), lambda g: (g * dvalue(),), what)


def abs(a):  # noqa: A001
    a = as_tensor(a)
    return _unary(a, np.abs(a.data), lambda: np.sign(a.data), "abs")


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _unary(a, out, lambda: out, "exp")


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericError("log of a non-positive value")
    return _unary(a, np.log(a.data), lambda: 1.0 / a.data, "log")


def sqrt(a):
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise NumericError("sqrt of a negative value")
    out = np.sqrt(a.data)
    return _unary(a, out, lambda: 0.5 / out, "sqrt")


def power(a, p):
    """Raise to a constant real exponent."""
    a = as_tensor(a)
    p = float(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(a.data, p)
    return _unary(a, out, lambda: p * np.power(a.data, p - 1.0), "power")


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _unary(a, out, lambda: 1.0 - out * out, "tanh")


def sigmoid(a):
    a = as_tensor(a)
    out = special.expit(a.data)
    return _unary(a, out, lambda: out * (1.0 - out), "sigmoid")


def cos(a):
    a = as_tensor(a)
    return _unary(a, np.cos(a.data), lambda: -np.sin(a.data), "cos")


def sin(a):
    a = as_tensor(a)
    return _unary(a, np.sin(a.data), lambda: np.cos(a.data), "sin")


def lgamma(a):
    """log Gamma(a) for a > 0; derivative is digamma."""
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericError("lgamma is only defined here for positive arguments")
    return _unary(a, special.gammaln(a.data), lambda: special.digamma(a.data), "lgamma")


def relu(a):
    a = as_tensor(a)
    return _unary(a, np.maximum(a.data, 0.0), lambda: (a.data > 0).astype(np.float64), "relu")


def leaky_relu(a, slope=LEAKY_SLOPE):
    a = as_tensor(a)
    pos = a.data > 0
    return _unary(a, np.where(pos, a.data, slope * a.data),
                  lambda: np.where(pos, 1.0, slope), "leaky_relu")


def prelu(a, slope):
    """max(0, x) + slope * min(0, x) with a learnable scalar ``slope``."""
    a, slope = as_tensor(a), as_tensor(slope)
    if slope.size != 1:
        raise ShapeError("prelu slope must be a scalar tensor")
    s = slope.data.reshape(())
    pos = a.data > 0
    neg_part = np.minimum(a.data, 0.0)
    sshape = slope.shape

    def bw(g):
        return (g * np.where(pos, 1.0, s),
                np.array(np.sum(g * neg_part)).reshape(sshape))

    return _make(np.where(pos, a.data, s * a.data), (a, slope), bw, "prelu")


def silu(a):
    a = as_tensor(a)
    sig = special.expit(a.data)
    return _unary(a, a.data * sig, lambda: sig * (1.0 + a.data * (1.0 - sig)), "silu")


def gelu(a):
    a = as_tensor(a)
    x = a.data
    t = np.tanh(_GELU_C * (x + _GELU_A * x ** 3))

    def d():
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)

    return _unary(a, 0.5 * x * (1.0 + t), d, "gelu")


def relu6(a):
    a = as_tensor(a)
    x = a.data
    return _unary(a, np.clip(x, 0.0, 6.0),
                  lambda: ((x > 0) & (x < 6)).astype(np.float64), "relu6")


def clamp(a, lo=None, hi=None):
    a = as_tensor(a)
    x = a.data
    lo_ = -np.inf if lo is None else lo
    hi_ = np.inf if hi is None else hi
    return _unary(a, np.clip(x, lo_, hi_),
                  lambda: ((x >= lo_) & (x <= hi_)).astype(np.float64), "clamp")


# --- losses -------------------------------------------------------------------------


def log_softmax(logits, axis=-1):
    logits = as_tensor(logits)
    shift = np.max(logits.data, axis=axis, keepdims=True)
    z = sub(logits, shift)
    return sub(z, log(sum(exp(z), axis=axis, keepdims=True)))


def loss_cross_entropy(logits, labels):
    """Mean negative log-softmax probability of the true class."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be [batch, classes], got {logits.shape}")
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise DataError("labels must be integer class indices")
        labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise DataError(f"label out of range [0, {c})")
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    return neg(mean(sum(mul(log_softmax(logits, axis=1), onehot), axis=1)))


def loss_gaussian_nll(pred, target):
    """Unit-variance Gaussian NLL without the constant: 0.5 * squared error.

    Squared errors are summed over output dimensions and averaged over the
    batch (the first axis), so each sample contributes its own log-likelihood.
    """
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    r = sub(pred, target)
    sq = mul(r, r)
    if sq.ndim == 0:
        return scale(sq, 0.5)
    if sq.ndim > 1:
        sq = sum(sq, axis=tuple(range(1, sq.ndim)))
    return scale(mean(sq), 0.5)


# --- backward ---------------------------------------------------------------------------


def _topo_order(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(root):
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf needing it."""
    if root.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _topo_order(root)
    grads = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
        node._parents = ()
        node._backward = None


# --- finite-difference checking ------------------------------------------------------


def numerical_grad(fn, inputs, eps=1e-5):
    """Central finite differences of scalar ``fn(*inputs)`` w.r.t. each input.

    Inputs are perturbed in place and restored; ``fn`` must rebuild its graph
    on every call.
    """
    out = []
    with no_grad():
        for t in inputs:
            # numpy scalars (e.g. from 0-d arithmetic) have no writable view
            t.data = np.array(t.data, dtype=np.float64)
            g = np.zeros_like(t.data)
            flat = t.data.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = fn(*inputs).item()
                flat[i] = orig - eps
                fm = fn(*inputs).item()
                flat[i] = orig
                gflat[i] = (fp - fm) / (2 * eps)
            out.append(g)
    return out


def relative_error(analytic, numeric, floor=1e-10):
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(n))
    if denom < floor:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def gradcheck(fn, inputs, eps=1e-5):
    """Largest relative error between backward and finite differences.

    Relative error is measured per input as ||a - n|| / max(||a||, ||n||).
    """
    for t in inputs:
        t.grad = None
    val = fn(*inputs)
    backward(val)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad for t in inputs]
    numeric = numerical_grad(fn, inputs, eps=eps)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))
