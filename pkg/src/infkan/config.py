"""Flat dotted-key run configuration.

A run is described by keys such as ``model.layers`` or ``optim.lr``.  Config
files are YAML (JSON is accepted too, being a subset); nested sections are
flattened, so ``{"optim": {"lr": 0.01}}`` and ``{"optim.lr": 0.01}`` mean the
same thing.  Precedence, lowest first: built-in defaults, the config file, the
``INFKAN_SEED`` environment variable (``seed`` only), command-line flags.
"""

from __future__ import annotations

import math
import os

import yaml

from .errors import UsageError
from .train import TrainConfig

SEED_ENV = "INFKAN_SEED"


def _int(v):
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError("expected an integer")
        return int(v)
    return int(v)


def _float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    out = float(v)
    if math.isnan(out):
        raise ValueError("expected a number")
    return out


def _bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "yes", "1", "on"):
        return True
    if isinstance(v, str) and v.lower() in ("false", "no", "0", "off"):
        return False
    if isinstance(v, int) and v in (0, 1):
        return bool(v)
    raise ValueError("expected true/false")


def _int_list(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if isinstance(v, str):
        v = [p for p in v.replace("[", "").replace("]", "").split(",") if p.strip()]
    if not isinstance(v, (list, tuple)):
        raise ValueError("expected a list of integers")
    out = [_int(x) for x in v]
    if any(x < 1 for x in out):
        raise ValueError("widths must be >= 1")
    return out


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(map(str, options))}")
        return v
    return parse


def _opt(parse):
    def wrapped(v):
        return None if v is None or v == "null" else parse(v)
    return wrapped


def _str(v):
    if not isinstance(v, str):
        raise ValueError("expected a string")
    return v


# key -> (TrainConfig field or None for data/run keys, parser)
KEYS = {
    "model.kind": ("model_kind", _choice("infinity", "fixed", "mlp")),
    "model.layers": ("layers", _int_list),
    "model.basis": ("basis", _str),
    "model.interp": ("interp_scheme", _opt(_choice("pinv", "linear", "lazy"))),
    "model.lazy_sigma": ("lazy_sigma", _float),
    "model.fixed_order": ("fixed_order", _int),
    "model.mlp_hidden": ("mlp_hidden", _int_list),
    "model.mlp_activation": ("mlp_activation", _choice("relu", "leaky_relu", "prelu", "silu",
                                                       "gelu", "relu6", "tanh")),
    "model.lambda_init": ("lambda_init", _float),
    "prior.eta": ("eta", _float),
    "prior.sigma": ("sigma", _float),
    "window.beta": ("beta", _float),
    "window.gamma": ("gamma", _float),
    "window.side": ("side", _opt(_choice("symmetric", "one_sided"))),
    "optim.lr": ("learning_rate", _float),
    "optim.weight_decay": ("weight_decay", _float),
    "optim.epochs": ("epochs", _int),
    "optim.batch_size": ("batch_size", _int),
    "optim.patience": ("patience", _int),
    "optim.grad_clip": ("grad_clip", _float),
    "optim.resize_per_batch": ("resize_per_batch", _bool),
    "optim.sample_lambda": ("sample_lambda", _bool),
    "seed": ("seed", _int),
    "data.generator": (None, _opt(_str)),
    "data.path": (None, _opt(_str)),
    "data.n": (None, _opt(_int)),
    "data.k": (None, _int),
    "data.noise": (None, _float),
    "data.seed": (None, _opt(_int)),
    "data.split_seed": (None, _opt(_int)),
    "data.task": (None, _choice("classification", "regression")),
    "data.header": (None, _bool),
    "data.scaling": (None, _choice("minmax", "standard", "none")),
    "data.target_cols": (None, _opt(lambda v: [_int(x) for x in (v if isinstance(v, list) else [v])])),
}

DATA_DEFAULTS = {
    "data.generator": "double_moons",
    "data.path": None,
    "data.n": None,
    "data.k": 2,
    "data.noise": 0.1,
    "data.seed": None,
    "data.split_seed": None,
    "data.task": "classification",
    "data.header": False,
    "data.scaling": "minmax",
    "data.target_cols": None,
}


def defaults():
    base = TrainConfig()
    out = {}
    for key, (attr, _) in KEYS.items():
        if attr is not None:
            v = getattr(base, attr)
            out[key] = list(v) if isinstance(v, (list, tuple)) else v
    out.update(DATA_DEFAULTS)
    return out


def flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_scalar(text):
    """Interpret a command-line value: YAML scalars/lists, with plain floats
    such as ``1e-2`` (which YAML 1.1 leaves as strings) read as numbers."""
    try:
        v = yaml.safe_load(text)
    except yaml.YAMLError:
        return text
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


def coerce(key, value):
    if key not in KEYS:
        raise UsageError(f"unknown config key {key!r}")
    try:
        return KEYS[key][1](value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key}: {value!r} ({exc})") from None


def read_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must be a mapping of keys to values")
    return flatten(doc)


def resolve(file_values=None, overrides=None, env=None):
    """Merge defaults, file values, ``INFKAN_SEED`` and overrides; validate."""
    env = os.environ if env is None else env
    cfg = defaults()
    for k, v in (file_values or {}).items():
        cfg[k] = coerce(k, v)
    if env.get(SEED_ENV) not in (None, ""):
        cfg["seed"] = coerce("seed", parse_scalar(env[SEED_ENV]))
    for k, v in (overrides or {}).items():
        cfg[k] = coerce(k, v)
    to_train_config(cfg)  # validates cross-field constraints
    return cfg


def to_train_config(cfg):
    kwargs = {attr: cfg[key] for key, (attr, _) in KEYS.items() if attr is not None}
    try:
        return TrainConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        for key, (attr, _) in KEYS.items():
            if attr and msg.startswith(attr + " "):
                msg = f"{key}: {msg}"
                break
        raise UsageError(msg) from None


def dump(cfg):
    return yaml.safe_dump(dict(sorted(cfg.items())), sort_keys=True, default_flow_style=None)
