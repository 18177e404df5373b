"""Synthetic generators, CSV ingestion and deterministic splits.

Splits hold out 20% of the samples for testing and 10% of the remainder for
validation (72/8/20 overall).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError
from .models import Task

GENERATORS = ("double_moons", "spiral", "spiral_hard")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task: Task
    train_idx: np.ndarray = None
    val_idx: np.ndarray = None
    test_idx: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DataError("features must be a 2-d array")
        if len(self.y) != len(self.X):
            raise DataError("features and targets differ in length")
        if self.train_idx is None:
            self.resplit(self.meta.get("split_seed", 0))
        check_disjoint(self.train_idx, self.val_idx, self.test_idx, len(self.X))

    def resplit(self, seed):
        self.train_idx, self.val_idx, self.test_idx = split_indices(len(self.X), seed)
        self.meta["split_seed"] = seed
        return self

    def split(self, name):
        idx = {"train": self.train_idx, "val": self.val_idx, "test": self.test_idx}[name]
        return self.X[idx], self.y[idx]

    @property
    def n_features(self):
        return self.X.shape[1]

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()


def split_indices(n, seed, test_frac=0.2, val_frac=0.1):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(round(test_frac * n))
    n_val = int(round(val_frac * (n - n_test)))
    test = np.sort(perm[:n_test])
    val = np.sort(perm[n_test:n_test + n_val])
    train = np.sort(perm[n_test + n_val:])
    return train, val, test


def check_disjoint(train, val, test, n):
    parts = [np.asarray(train), np.asarray(val), np.asarray(test)]
    joined = np.concatenate(parts)
    if len(np.unique(joined)) != len(joined):
        raise DataError("train/val/test splits overlap")
    if len(joined) != n:
        raise DataError("splits do not cover the dataset")


# --- generators -------------------------------------------------------------------------


def gen_double_moons(n=1000, noise_sigma=0.1, seed=0, split_seed=None):
    """Two interleaved unit half circles.

    Class 0 is the upper arc (cos t, sin t); class 1 the lower arc
    (1 - cos t, 0.5 - sin t), t in [0, pi].  Gaussian noise of scale
    ``noise_sigma`` is added to both coordinates.
    """
    if n < 4:
        raise DataError("double moons needs n >= 4")
    rng = np.random.default_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([upper, lower]) + rng.normal(0.0, noise_sigma, size=(n, 2))
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    meta = {"name": "double_moons", "n": n, "noise_sigma": noise_sigma, "seed": seed,
            "split_seed": seed if split_seed is None else split_seed}
    return Dataset(X, y, Task("classification", 2), meta=meta)


def gen_spiral(n=2000, k=2, noise_sigma=0.1, seed=0, hard=False, task="classification",
               split_seed=None):
    """``k`` interleaved Archimedean arms, radius equal to the angle parameter.

    Arm j holds points r = t, angle = t + 2 pi j / k with t evenly spaced on
    [0, 3 pi] ([0, 6 pi] when ``hard``).  Classification targets are arm
    indices; regression targets are t / t_max, the normalised position along
    the arm, which turns the arms into a 3-d helix-like surface.
    """
    if k < 2:
        raise DataError("spiral needs at least 2 arms")
    if n < 2 * k:
        raise DataError("spiral needs n >= 2k")
    if task not in ("classification", "regression"):
        raise DataError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    t_max = (6.0 if hard else 3.0) * np.pi
    counts = [n // k + (1 if j < n % k else 0) for j in range(k)]
    xs, labels, phase = [], [], []
    for j, c in enumerate(counts):
        t = np.linspace(0.0, t_max, c)
        ang = t + 2.0 * np.pi * j / k
        xs.append(np.column_stack([t * np.cos(ang), t * np.sin(ang)]))
        labels.append(np.full(c, j, dtype=np.int64))
        phase.append(t / t_max)
    X = np.vstack(xs) + rng.normal(0.0, noise_sigma, size=(n, 2))
    meta = {"name": "spiral_hard" if hard else "spiral", "n": n, "k": k,
            "noise_sigma": noise_sigma, "seed": seed, "hard": hard, "task": task,
            "split_seed": seed if split_seed is None else split_seed}
    if task == "classification":
        return Dataset(X, np.concatenate(labels), Task("classification", k), meta=meta)
    y = np.concatenate(phase).reshape(-1, 1)
    return Dataset(X, y, Task("regression", 1), meta=meta)


def generate(name, **params):
    if name == "double_moons":
        return gen_double_moons(**params)
    if name == "spiral":
        return gen_spiral(**params)
    if name == "spiral_hard":
        return gen_spiral(hard=True, **params)
    raise DataError(f"unknown dataset {name!r}; valid names: {', '.join(GENERATORS)}")


# --- CSV ------------------------------------------------------------------------------


def _parse_float(cell, row, col):
    try:
        v = float(cell)
    except ValueError:
        raise FormatError(f"non-numeric cell {cell!r}", row=row, col=col) from None
    if not math.isfinite(v):
        raise FormatError(f"non-finite cell {cell!r}", row=row, col=col)
    return v


def read_csv_matrix(path, header=False):
    """Numeric CSV as a float array; rows and columns in errors are 1-based."""
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for r, line in enumerate(csv.reader(fh), start=1):
            if header and r == 1:
                continue
            if not line or all(not c.strip() for c in line):
                continue
            if width is None:
                width = len(line)
            elif len(line) != width:
                raise FormatError(f"expected {width} columns, found {len(line)}", row=r)
            rows.append([_parse_float(c.strip(), r, ci) for ci, c in enumerate(line, start=1)])
    if not rows:
        raise FormatError("no data rows")
    return np.array(rows, dtype=np.float64)


def scale_features(X, scaling):
    if scaling in (None, "none"):
        return X
    if scaling == "minmax":
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        out = 2.0 * (X - lo) / span - 1.0
        out[:, hi == lo] = 0.0
        return out
    if scaling == "standard":
        mu, sd = X.mean(axis=0), X.std(axis=0)
        return (X - mu) / np.where(sd > 0, sd, 1.0)
    raise DataError(f"unknown scaling {scaling!r}")


def load_csv(path, task="classification", target_cols=None, header=False,
             scaling="minmax", seed=0):
    """Load a numeric CSV.

    The label is the last column unless ``target_cols`` (0-based indices) are
    given.  Features are scaled per column (``minmax`` to [-1, 1],
    ``standard`` to zero mean/unit variance, or ``none``).
    """
    M = read_csv_matrix(path, header=header)
    ncol = M.shape[1]
    if ncol < 2:
        raise FormatError("need at least one feature and one target column")
    targets = [ncol - 1] if target_cols is None else [c % ncol for c in target_cols]
    feats = [c for c in range(ncol) if c not in targets]
    X = scale_features(M[:, feats], scaling)
    if task == "classification":
        if len(targets) != 1:
            raise DataError("classification takes exactly one label column")
        lab = M[:, targets[0]]
        if not np.all(lab == np.round(lab)) or lab.min() < 0:
            raise DataError("labels must be non-negative integers")
        y = lab.astype(np.int64)
        t = Task("classification", int(y.max()) + 1)
    elif task == "regression":
        y = M[:, targets]
        t = Task("regression", len(targets))
    else:
        raise DataError(f"unknown task {task!r}")
    meta = {"name": "csv", "path": str(path), "scaling": scaling, "split_seed": seed}
    return Dataset(X, y, t, meta=meta)


def _fmt(v):
    return repr(float(v))


def write_csv(dataset, path, meta_path=None):
    """Write features and target(s) plus a JSON metadata sidecar."""
    X, y = dataset.X, dataset.y
    ycols = y.reshape(len(y), -1)
    header = [f"x{i}" for i in range(X.shape[1])]
    header += ["label"] if dataset.task.is_classification else [f"y{i}" for i in range(ycols.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for xi, yi in zip(X, ycols):
            tail = [str(int(yi[0]))] if dataset.task.is_classification else [_fmt(v) for v in yi]
            w.writerow([_fmt(v) for v in xi] + tail)
    meta_path = meta_path or f"{path}.meta.json"
    meta = dict(dataset.meta)
    meta["task"] = dataset.task.kind
    meta["rows"] = len(X)
    meta["fingerprint"] = dataset.fingerprint()
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, meta_path
