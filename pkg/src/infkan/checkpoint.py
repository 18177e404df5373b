"""Checkpoint container.

A checkpoint is a single UTF-8 JSON document::

    {
      "format": "infkan-checkpoint",
      "version": 1,
      "config": {...},          # TrainConfig fields, echoed verbatim
      "model": {...},           # best-by-validation model state
      "final_model": {...},     # model at the end of training
      "optimizer": {...}|null,  # AdamW state for final_model
      "rng": {...}|null,        # numpy bit-generator state at the end of training
      "best_epoch": int,
      "epochs_run": int,
      "dataset_fingerprint": str|null,
      "run_config": {...}|null  # flat dotted-key CLI config, data keys included
    }

Model state lists, per layer, the widths, basis family, window parameters,
current order K, coefficients theta with shape [d_out, d_in, K] (nested lists),
the PReLU slope if any and the normalisation running statistics.  Floats are
written with ``repr`` precision, so a save/load round trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .errors import FormatError
from .models import model_from_state
from .optim import AdamW

FORMAT = "infkan-checkpoint"
VERSION = 1


def to_dict(config, result, dataset_fingerprint=None, run_config=None):
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": _jsonable(asdict(config)),
        "model": result.model.state(),
        "final_model": (result.final_model or result.model).state(),
        "optimizer": result.optimizer.state() if result.optimizer is not None else None,
        "rng": _jsonable(result.rng_state),
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.records),
        "dataset_fingerprint": dataset_fingerprint,
        "run_config": _jsonable(run_config),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save(path, config, result, dataset_fingerprint=None, run_config=None):
    doc = to_dict(config, result, dataset_fingerprint, run_config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
    return doc


def load(path):
    """Read a checkpoint; returns ``(model, doc)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise FormatError("not an infkan checkpoint")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported checkpoint version {doc.get('version')!r}")
    try:
        model = model_from_state(doc["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"corrupt model state: {exc}") from None
    return model, doc


def load_final(doc):
    """End-of-training model and its optimizer (None when not saved)."""
    model = model_from_state(doc["final_model"])
    s = doc.get("optimizer")
    if s is None:
        return model, None
    opt = AdamW(model.parameters(), no_decay=model.no_decay_parameters())
    opt.load_state(s)
    return model, opt


def load_rng(doc):
    rng = np.random.default_rng()
    if doc.get("rng") is not None:
        rng.bit_generator.state = doc["rng"]
    return rng
