"""Diagnostics over trained models, emitted as flat rows for CSV output."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import basis as B
from .kan_layer import KanLayer
from .variational import elbo, lipschitz_probe
from .window import WindowParams, half_width, positions, weight_function

PROBE_KINDS = ("lipschitz", "window-shape", "basis-orthogonality", "gradcheck",
               "convergence", "firstorder")

KINK_MARGIN = 1e-3
KINKED = ("relu", "leaky_relu", "prelu", "relu6")


def window_shape_rows(windows, pad=2):
    """The smooth weight on integer positions around each window.

    ``windows`` is a list of (label, WindowParams).  Positions run over the
    window grid plus ``pad`` points beyond each end; ``in_window`` marks the
    grid points that carry coefficients.
    """
    rows = []
    for label, p in windows:
        lam = p.lambda_value
        c = half_width(lam)
        K = 2 * c + 1 if p.side == "symmetric" else c + 1
        grid = set(positions(K, p.side).tolist())
        lo = -(c + pad) if p.side == "symmetric" else 0
        for x in range(lo, c + pad + 1):
            rows.append({
                "layer": label, "x": x, "w": float(weight_function(x, lam, p.beta, p.gamma)),
                "lambda_bar": lam, "beta": p.beta, "gamma": p.gamma, "side": p.side,
                "in_window": float(x) in grid,
            })
    return rows


def orthogonality_rows(specs):
    """Gram matrices for (label, family, n) triples, one row per entry."""
    rows = []
    for label, family, n in specs:
        if family.kind == "piecewise":
            continue
        g = B.gram_matrix(family, n)
        off = float(np.max(np.abs(g - np.diag(np.diag(g))))) if n > 1 else 0.0
        for i in range(n):
            for j in range(n):
                rows.append({"layer": label, "family": str(family), "n": n, "i": i + 1,
                             "j": j + 1, "value": float(g[i, j]), "max_off_diagonal": off})
    return rows


def lipschitz_rows(model, X, y, priors, k_min=3, k_max=15, scheme="lazy", seed=0):
    rows = []
    for rep in lipschitz_probe(model, X, y, priors, range(k_min, k_max + 1), scheme=scheme,
                               seed=seed):
        for K, total, prior in zip(rep["K"], rep["elbo"], rep["prior_term"]):
            rows.append({
                "layer": rep["layer"], "scheme": rep["scheme"], "K": K, "elbo": total,
                "prior_term": prior, "ratio_prior": rep["ratio_prior"],
                "ratio_total": rep["ratio_total"], "bound_M": rep["bound_M"],
                "within_bound": rep["within_bound"],
            })
    return rows


def kink_distance(model, X):
    """Per row, the smallest distance between a piecewise basis argument
    z - t_k and its kink at 0, over every layer (eval-mode normalisation)."""
    h = ad.as_tensor(np.asarray(X, dtype=np.float64))
    dist = np.full(h.shape[0], np.inf)
    with ad.no_grad():
        for layer in getattr(model, "kan_layers", ()):
            if layer.family.kind == "piecewise" and layer.family.activation in KINKED:
                z = np.tanh(layer.normalize(h, "eval").data)
                d = np.abs(z[:, :, None] - B.knots(layer.K)[None, None, :])
                dist = np.minimum(dist, d.reshape(len(dist), -1).min(axis=1))
            h = layer.forward(h, "eval")
    return dist


def _named_parameters(model):
    out = []
    for li, layer in enumerate(getattr(model, "layers", [])):
        if isinstance(layer, KanLayer):
            out.append((f"layer{li}.theta", layer.theta))
            if layer.learn_lambda:
                out.append((f"layer{li}.lambda_bar", layer.window.lambda_bar))
            if layer.slope is not None:
                out.append((f"layer{li}.slope", layer.slope))
        else:
            out.append((f"layer{li}.W", layer.W))
            out.append((f"layer{li}.b", layer.b))
    return out


def elbo_gradcheck_rows(model, X, y, priors, rows=64, max_entries=64, eps=1e-5, seed=0):
    """Backward versus central differences for the full eval-mode ELBO.

    Rows too close to a ReLU kink for the step ``eps`` are skipped; for large
    tensors a random subset of at most ``max_entries`` coordinates is checked.
    """
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    keep = np.flatnonzero(kink_distance(model, X) > KINK_MARGIN)[:rows]
    Xs, ys = X[keep], y[keep]
    D = len(Xs)
    if D == 0:
        return []

    def objective():
        return elbo(model, Xs, ys, priors, D, mode="eval").total_tensor

    named = _named_parameters(model)
    for _, p in named:
        p.grad = None
    ad.backward(objective())
    out = []
    with ad.no_grad():
        for name, p in named:
            analytic = np.zeros_like(p.data) if p.grad is None else p.grad
            p.data = np.array(p.data, dtype=np.float64)
            flat = p.data.reshape(-1)
            n = flat.size
            idx = np.arange(n) if n <= max_entries else np.sort(rng.choice(n, max_entries, replace=False))
            num = np.empty(len(idx))
            for j, i in enumerate(idx):
                orig = flat[i]
                flat[i] = orig + eps
                fp = objective().item()
                flat[i] = orig - eps
                fm = objective().item()
                flat[i] = orig
                num[j] = (fp - fm) / (2 * eps)
            err = ad.relative_error(analytic.reshape(-1)[idx], num)
            out.append({"parameter": name, "entries": len(idx), "size": n, "rows": D,
                        "rel_error": err})
    for _, p in named:
        p.grad = None
    return out


def windows_of(model):
    return [(i, layer.window) for i, layer in enumerate(getattr(model, "kan_layers", ()))]


def single_window(lam, beta=2.0, gamma=1.0, side="symmetric"):
    return [("-", WindowParams(ad.Tensor(float(lam)), beta, gamma, side))]
