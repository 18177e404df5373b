"""Model containers: stacked KAN layers and the MLP baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .basis import BasisFamily
from .errors import ShapeError
from .kan_layer import KanLayer
from .window import WindowParams, lambda_for_order


@dataclass(frozen=True)
class Task:
    kind: str  # "classification" | "regression"
    n_outputs: int

    @property
    def is_classification(self):
        return self.kind == "classification"


def _data_nll(task, out, y):
    if task.is_classification:
        return ad.loss_cross_entropy(out, y)
    y = np.asarray(y, dtype=np.float64).reshape(out.shape)
    return ad.loss_gaussian_nll(out, y)


def chain_widths(d_in, widths, n_outputs):
    """Input/output size pairs; a head is appended when the last width differs."""
    widths = list(widths)
    if not widths or widths[-1] != n_outputs:
        widths.append(n_outputs)
    dims = [d_in] + widths
    return list(zip(dims[:-1], dims[1:]))


class KanModel:
    """A stack of KAN layers.

    ``kind`` is ``"infinity"`` (learned basis count) or ``"fixed"`` (frozen
    order, never resized).
    """

    def __init__(self, layers, task, kind="infinity", interp_scheme="pinv", lazy_sigma=0.0):
        for a, b in zip(layers[:-1], layers[1:]):
            if a.d_out != b.d_in:
                raise ShapeError(f"layer widths do not chain: {a.d_out} -> {b.d_in}")
        if layers[-1].d_out != task.n_outputs:
            raise ShapeError("last layer width must equal the task output size")
        self.layers = list(layers)
        self.task = task
        self.kind = kind
        self.interp_scheme = interp_scheme
        self.lazy_sigma = lazy_sigma

    @property
    def kan_layers(self):
        return self.layers

    def forward(self, x, mode="train"):
        h = ad.as_tensor(x)
        for layer in self.layers:
            h = layer.forward(h, mode)
        return h

    __call__ = forward

    def data_nll(self, out, y):
        return _data_nll(self.task, out, y)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def no_decay_parameters(self):
        return [l.window.lambda_bar for l in self.layers if l.learn_lambda] + \
               [l.slope for l in self.layers if l.slope is not None]

    def n_params(self):
        return sum(layer.n_params() for layer in self.layers)

    def orders(self):
        return [layer.K for layer in self.layers]

    def lambdas(self):
        return [layer.window.lambda_value for layer in self.layers]

    def state(self):
        return {
            "type": "kan",
            "kind": self.kind,
            "task": [self.task.kind, self.task.n_outputs],
            "interp_scheme": self.interp_scheme,
            "lazy_sigma": self.lazy_sigma,
            "layers": [layer.state() for layer in self.layers],
        }


class Linear:
    def __init__(self, d_in, d_out):
        self.d_in, self.d_out = d_in, d_out
        self.W = Tensor(np.zeros((d_in, d_out)), requires_grad=True, name="W")
        self.b = Tensor(np.zeros(d_out), requires_grad=True, name="b")

    def init(self, rng):
        self.W.data = rng.normal(0.0, np.sqrt(2.0 / self.d_in), size=(self.d_in, self.d_out))
        self.b.data = np.zeros(self.d_out)

    def forward(self, x):
        return ad.add(ad.matmul(x, self.W), self.b)


class MlpModel:
    """Affine layers with an activation between them; no variational terms."""

    def __init__(self, d_in, hidden, task, activation="relu"):
        self.task = task
        self.activation = activation
        dims = [d_in] + list(hidden) + [task.n_outputs]
        self.layers = [Linear(a, b) for a, b in zip(dims[:-1], dims[1:])]
        self.kind = "mlp"

    kan_layers = ()

    def init(self, rng):
        for layer in self.layers:
            layer.init(rng)

    def _act(self, h):
        if self.activation == "prelu":
            return ad.leaky_relu(h, 0.25)
        return getattr(ad, self.activation)(h)

    def forward(self, x, mode="train"):
        h = ad.as_tensor(x)
        if h.ndim != 2 or h.shape[1] != self.layers[0].d_in:
            raise ShapeError(f"model expects [batch, {self.layers[0].d_in}] input, got {h.shape}")
        for i, layer in enumerate(self.layers):
            h = layer.forward(h)
            if i < len(self.layers) - 1:
                h = self._act(h)
        return h

    __call__ = forward

    def data_nll(self, out, y):
        return _data_nll(self.task, out, y)

    def parameters(self):
        return [t for layer in self.layers for t in (layer.W, layer.b)]

    def no_decay_parameters(self):
        return []

    def n_params(self):
        return sum(l.W.size + l.b.size for l in self.layers)

    def orders(self):
        return []

    def lambdas(self):
        return []

    def state(self):
        return {
            "type": "mlp",
            "task": [self.task.kind, self.task.n_outputs],
            "activation": self.activation,
            "dims": [[l.d_in, l.d_out] for l in self.layers],
            "W": [l.W.data.tolist() for l in self.layers],
            "b": [l.b.data.tolist() for l in self.layers],
        }


def build_kan(d_in, widths, task, family, kind="infinity", lambda_init=2.0, fixed_order=5,
              beta=2.0, gamma=1.0, side=None, interp_scheme=None, lazy_sigma=0.0, rng=None):
    if isinstance(family, str):
        family = BasisFamily.parse(family)
    side = side or family.default_side
    rng = rng if rng is not None else np.random.default_rng(0)
    if kind == "fixed":
        lam = lambda_for_order(fixed_order, side)
    else:
        lam = float(lambda_init)
    layers = []
    for a, b in chain_widths(d_in, widths, task.n_outputs):
        w = WindowParams(Tensor(lam), beta, gamma, side)
        layer = KanLayer(a, b, family, w, learn_lambda=(kind != "fixed"))
        layer.init_theta(rng)
        layers.append(layer)
    if interp_scheme is None:
        interp_scheme = "pinv" if family.requires_interp else "lazy"
    return KanModel(layers, task, kind, interp_scheme, lazy_sigma)


def build_baseline_mlp(d_in, widths, task, activation="relu", rng=None):
    if not widths:
        raise ValueError("MLP needs at least one hidden width")
    model = MlpModel(d_in, widths, task, activation)
    model.init(rng if rng is not None else np.random.default_rng(0))
    return model


def model_from_state(s):
    task = Task(*s["task"])
    if s["type"] == "mlp":
        dims = s["dims"]
        m = MlpModel(dims[0][0], [d[1] for d in dims[:-1]], task, s["activation"])
        for layer, W, b in zip(m.layers, s["W"], s["b"]):
            layer.W.data = np.array(W, dtype=float).reshape(layer.d_in, layer.d_out)
            layer.b.data = np.array(b, dtype=float).reshape(layer.d_out)
        return m
    layers = [KanLayer.from_state(ls) for ls in s["layers"]]
    return KanModel(layers, task, s["kind"], s["interp_scheme"], s["lazy_sigma"])
