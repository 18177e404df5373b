"""Training loop: minibatch ELBO ascent with basis-count resizing.

Each epoch first refreshes every learnable layer's basis count from its
current lambda (resizing coefficients and optimizer moments with the model's
interpolation scheme when it changed), then runs one shuffled pass of AdamW on
-ELBO / D.  After the pass the model is evaluated on the train, validation and
test splits and an :class:`EpochRecord` is appended.  Training stops early
when the validation metric has not improved for ``patience`` epochs; the model
returned is the last one that attained the best validation metric.
"""

from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .data import Dataset
from .errors import DataError, DivergedError, NumericError
from .models import KanModel, Task, build_baseline_mlp, build_kan
from .optim import AdamW
from .variational import Priors, elbo
from .window import effective_order, order_for_lambda

log = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1


@dataclass
class TrainConfig:
    model_kind: str = "infinity"  # infinity | fixed | mlp
    layers: list = field(default_factory=lambda: [8, 2])
    basis: str = "relu"
    interp_scheme: str = None  # default: pinv for piecewise bases, lazy otherwise
    lazy_sigma: float = 0.0
    fixed_order: int = 5
    mlp_hidden: list = field(default_factory=lambda: [32, 32])
    mlp_activation: str = "relu"
    lambda_init: float = 2.0
    beta: float = 2.0
    gamma: float = 1.0
    side: str = None
    eta: float = 5.0
    sigma: float = 1.0
    epochs: int = 1000
    learning_rate: float = 1e-2
    weight_decay: float = 1e-5
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    batch_size: int = 64
    patience: int = 100
    grad_clip: float = 10.0
    resize_per_batch: bool = False
    sample_lambda: bool = False
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.lambda_init < 0:
            raise ValueError("lambda_init must be non-negative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.fixed_order < 1:
            raise ValueError("fixed_order must be >= 1")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")
        if self.model_kind not in ("infinity", "fixed", "mlp"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        self.epochs = int(self.epochs)
        self.batch_size = int(self.batch_size)
        self.betas = tuple(self.betas)


@dataclass
class EpochRecord:
    epoch: int
    train_metric: float
    val_metric: float
    test_metric: float
    K: list
    lambda_bar: list
    n_params: int
    elbo: dict
    resized: bool = False
    wall_time: float = 0.0

    def metrics_row(self):
        """Record as written to the metrics stream (timing lives elsewhere)."""
        d = asdict(self)
        d.pop("wall_time")
        d["schema_version"] = METRICS_SCHEMA_VERSION
        return d


def build_model(config, d_in, task, rng):
    if config.model_kind == "mlp":
        return build_baseline_mlp(d_in, config.mlp_hidden, task, config.mlp_activation, rng)
    return build_kan(
        d_in, config.layers, task, config.basis, kind=config.model_kind,
        lambda_init=config.lambda_init, fixed_order=config.fixed_order,
        beta=config.beta, gamma=config.gamma, side=config.side,
        interp_scheme=config.interp_scheme, lazy_sigma=config.lazy_sigma, rng=rng,
    )


def make_priors(model, config):
    return Priors.uniform(len(model.kan_layers), config.eta, config.sigma)


def evaluate(model, X, y):
    """Accuracy for classification, mean Gaussian NLL for regression (eval mode)."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise DataError("cannot evaluate on an empty split")
    with ad.no_grad():
        out = model.forward(X, mode="eval")
        if model.task.is_classification:
            return float(np.mean(np.argmax(out.data, axis=1) == np.asarray(y)))
        return model.data_nll(out, y).item()


def _score(task, metric):
    return metric if task.is_classification else -metric


def refresh_orders(model, optimizer, rng, sample=False):
    """Resize every learnable layer whose order no longer matches its lambda."""
    if not isinstance(model, KanModel) or model.kind == "fixed":
        return False
    changed = False
    for layer in model.layers:
        if not layer.learn_lambda:
            continue
        if sample:
            lam = float(rng.poisson(layer.window.lambda_value))
            new_K = order_for_lambda(lam, layer.window.side)
        else:
            new_K = effective_order(layer.window)
        if new_K == layer.K:
            continue
        scheme = model.interp_scheme
        if scheme == "linear" and layer.family.kind != "piecewise":
            scheme = "lazy"
        old_K = layer.K
        M = layer.resize(new_K, scheme, rng=rng, lazy_sigma=model.lazy_sigma)
        if optimizer is not None:
            optimizer.remap(layer.theta, M, new_K)
        log.debug("resized layer %d -> %d (%s)", old_K, new_K, scheme)
        changed = True
    return changed


def _clamp_lambdas(model):
    for layer in getattr(model, "kan_layers", ()):
        layer.window.clamp()


def make_optimizer(model, config):
    return AdamW(model.parameters(), lr=config.learning_rate, betas=config.betas,
                 eps=config.adam_eps, weight_decay=config.weight_decay,
                 no_decay=model.no_decay_parameters())


@dataclass
class TrainResult:
    model: object  # best-by-validation model
    records: list
    optimizer: AdamW  # state at the end of training
    rng_state: dict
    best_epoch: int
    final_model: object = None  # the model the optimizer state belongs to


def train(dataset, config, model=None, on_epoch=None):
    """Fit a model on ``dataset``; returns ``(model, records)``.

    ``on_epoch`` (optional) is called with each :class:`EpochRecord` as soon as
    it is produced, which lets callers stream metrics.
    """
    res = fit(dataset, config, model, on_epoch)
    return res.model, res.records


def fit(dataset, config, model=None, on_epoch=None):
    """Like :func:`train` but also returns optimizer and generator state."""
    if not isinstance(dataset, Dataset):
        raise TypeError("dataset must be a Dataset")
    rng = np.random.default_rng(config.seed)
    task = dataset.task
    Xtr, ytr = dataset.split("train")
    Xva, yva = dataset.split("val")
    Xte, yte = dataset.split("test")
    if len(Xtr) == 0:
        raise DataError("empty training split")
    if model is None:
        model = build_model(config, Xtr.shape[1], task, rng)
    priors = make_priors(model, config)
    opt = make_optimizer(model, config)
    D = len(Xtr)
    bs = min(config.batch_size, D)

    records = []
    best_score, best_model, best_epoch, since_best = -math.inf, None, -1, 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        resized = refresh_orders(model, opt, rng, config.sample_lambda)
        perm = rng.permutation(D)
        for start in range(0, D, bs):
            idx = perm[start:start + bs]
            if len(idx) < 2 and D >= 2:
                continue  # batch statistics need two samples
            if config.resize_per_batch and start > 0:
                resized |= refresh_orders(model, opt, rng, config.sample_lambda)
            opt.zero_grad()
            try:
                br = elbo(model, Xtr[idx], ytr[idx], priors, D)
                loss = ad.scale(br.total_tensor, -1.0 / D)
            except NumericError as exc:
                raise DivergedError(str(exc), epoch - 1, records) from exc
            loss.backward()
            opt.clip_grad_norm(config.grad_clip)
            opt.step()
            _clamp_lambdas(model)
        try:
            with ad.no_grad():
                full = elbo(model, Xtr, ytr, priors, D, mode="eval")
            train_metric = evaluate(model, Xtr, ytr)
            val_metric = evaluate(model, Xva, yva) if len(Xva) else train_metric
            test_metric = evaluate(model, Xte, yte) if len(Xte) else float("nan")
        except NumericError as exc:
            raise DivergedError(str(exc), epoch - 1, records) from exc
        if not all(math.isfinite(v) for v in (full.total, train_metric, val_metric)):
            raise DivergedError("non-finite metrics", epoch - 1, records)
        rec = EpochRecord(
            epoch=epoch,
            train_metric=train_metric,
            val_metric=val_metric,
            test_metric=test_metric,
            K=model.orders(),
            lambda_bar=model.lambdas(),
            n_params=model.n_params(),
            elbo=full.as_dict(),
            resized=bool(resized),
            wall_time=time.perf_counter() - t0,
        )
        records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)

        score = _score(task, val_metric)
        if score > best_score:
            best_score, since_best = score, 0
            best_model, best_epoch = copy.deepcopy(model), epoch
        else:
            since_best += 1
            if score == best_score:
                best_model, best_epoch = copy.deepcopy(model), epoch
        if config.patience and since_best >= config.patience:
            log.info("early stop at epoch %d", epoch)
            break
    if best_model is None:
        best_model, best_epoch = model, len(records) - 1
    return TrainResult(best_model, records, opt, rng.bit_generator.state, best_epoch, model)
