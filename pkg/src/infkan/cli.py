"""Command line entry point.

    infkan generate NAME [--n N] [--k K] [--noise S] [--seed S] [--out PATH]
    infkan train    [--config FILE] [--out DIR] [--section.key VALUE ...]
    infkan evaluate --checkpoint FILE [--split test] [--section.key VALUE ...]
    infkan sweep    [--config FILE] --grid KEY=V1,V2 [...] [--out DIR] [--workers N]
    infkan probe    KIND [--checkpoint FILE] [--out CSV] [...]

Exit codes: 0 success, 2 usage error, 3 training diverged, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import itertools
import json
import logging
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import checkpoint as ckpt
from . import config as C
from . import probes
from . import proptests
from .basis import BasisFamily
from .data import GENERATORS, generate, load_csv, write_csv
from .errors import DivergedError, FormatError, InfKanError, UsageError
from .train import evaluate as eval_metric
from .train import fit, make_priors

log = logging.getLogger("infkan")

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- helpers ----------------------------------------------------------------------------


def parse_overrides(extra):
    """``--section.key value`` / ``--section.key=value`` pairs to a dict."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, _, raw = key.partition("=")
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for --{key}")
            raw = extra[i + 1]
            i += 2
        if key not in C.KEYS:
            raise UsageError(f"unknown config key {key!r}")
        out[key] = C.parse_scalar(raw)
    return out


def resolve_config(config_path, extra):
    file_values = C.read_file(config_path) if config_path else {}
    grid = {k[5:]: v for k, v in file_values.items() if k.startswith("grid.")}
    file_values = {k: v for k, v in file_values.items() if not k.startswith("grid.")}
    return C.resolve(file_values, parse_overrides(extra)), grid


def build_dataset(cfg):
    if cfg.get("data.path"):
        return load_csv(cfg["data.path"], task=cfg["data.task"], target_cols=cfg["data.target_cols"],
                        header=cfg["data.header"], scaling=cfg["data.scaling"],
                        seed=_split_seed(cfg))
    name = cfg["data.generator"]
    if name not in GENERATORS:
        raise UsageError(f"unknown dataset {name!r}; valid names: {', '.join(GENERATORS)}")
    params = {"noise_sigma": cfg["data.noise"], "seed": _data_seed(cfg),
              "split_seed": _split_seed(cfg)}
    if cfg["data.n"] is not None:
        params["n"] = cfg["data.n"]
    if name != "double_moons":
        params["k"] = cfg["data.k"]
        params["task"] = cfg["data.task"]
    return generate(name, **params)


def _data_seed(cfg):
    return cfg["seed"] if cfg["data.seed"] is None else cfg["data.seed"]


def _split_seed(cfg):
    return _data_seed(cfg) if cfg["data.split_seed"] is None else cfg["data.split_seed"]


def version_string():
    try:
        here = os.path.dirname(os.path.abspath(__file__))
        desc = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                              capture_output=True, text=True, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__} ({desc.stdout.strip()})"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_rows(rows, out):
    """Rows (dicts with identical keys) as CSV to a path, or stdout for None/-."""
    if not rows:
        raise UsageError("probe produced no rows")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([_fmt(v) for v in r.values()])
    if out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


# --- generate ---------------------------------------------------------------------------


def cmd_generate(args):
    if args.name not in GENERATORS:
        raise UsageError(f"unknown dataset {args.name!r}; valid names: {', '.join(GENERATORS)}")
    params = {"noise_sigma": args.noise, "seed": args.seed, "split_seed": args.split_seed}
    if args.n is not None:
        params["n"] = args.n
    if args.name != "double_moons":
        params["k"] = args.k
        params["task"] = args.task
    ds = generate(args.name, **params)
    out = args.out or f"{args.name}.csv"
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    path, meta = write_csv(ds, out)
    print(f"wrote {len(ds.X)} rows to {path} (metadata {meta})")
    return EXIT_OK


# --- train ------------------------------------------------------------------------------


def run_training(cfg, out_dir, quiet=True):
    """Train one configuration into ``out_dir``; returns a summary dict.

    Writes config.yaml, manifest.json (before training), metrics.jsonl (one
    EpochRecord per line, flushed as produced), timing.jsonl, checkpoint.json
    and completion.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    tc = C.to_train_config(cfg)
    ds = build_dataset(cfg)
    paths = {name: os.path.join(out_dir, name) for name in
             ("config.yaml", "manifest.json", "metrics.jsonl", "timing.jsonl",
              "checkpoint.json", "completion.json")}
    with open(paths["config.yaml"], "w", encoding="utf-8") as fh:
        fh.write(C.dump(cfg))
    fingerprint = ds.fingerprint()
    _write_json(paths["manifest.json"], {
        "config": cfg,
        "version": version_string(),
        "seed": cfg["seed"],
        "started": _now(),
        "dataset_fingerprint": fingerprint,
        "dataset": ds.meta,
        "outputs": {k: os.path.abspath(v) for k, v in paths.items()},
    })
    metrics = open(paths["metrics.jsonl"], "w", encoding="utf-8")
    timing = open(paths["timing.jsonl"], "w", encoding="utf-8")

    def on_epoch(rec):
        metrics.write(json.dumps(rec.metrics_row(), sort_keys=True) + "\n")
        metrics.flush()
        timing.write(json.dumps({"epoch": rec.epoch, "wall_time": rec.wall_time}) + "\n")
        timing.flush()
        if not quiet:
            log.info("epoch %d train %.4f val %.4f test %.4f K %s", rec.epoch,
                     rec.train_metric, rec.val_metric, rec.test_metric, rec.K)

    try:
        result = fit(ds, tc, on_epoch=on_epoch)
    except DivergedError as exc:
        _write_json(paths["completion.json"], {
            "status": "diverged", "finished": _now(), "message": str(exc),
            "last_good_epoch": exc.last_good_epoch})
        raise
    finally:
        metrics.close()
        timing.close()
    ckpt.save(paths["checkpoint.json"], tc, result, fingerprint, run_config=cfg)
    best = result.records[result.best_epoch]
    last = result.records[-1]
    summary = {
        "status": "ok",
        "finished": _now(),
        "epochs_run": len(result.records),
        "best_epoch": result.best_epoch,
        "best_val_metric": best.val_metric,
        "best_test_metric": best.test_metric,
        "final_K": last.K,
        "final_lambda_bar": last.lambda_bar,
        "n_params": best.n_params,
    }
    _write_json(paths["completion.json"], summary)
    return summary


def cmd_train(args, extra):
    cfg, _ = resolve_config(args.config, extra)
    out = args.out or os.path.join("runs", f"{cfg['data.generator'] or 'csv'}-seed{cfg['seed']}")
    summary = run_training(cfg, out, quiet=not args.verbose)
    print(json.dumps({"out": out, **{k: summary[k] for k in
                      ("epochs_run", "best_epoch", "best_val_metric", "best_test_metric",
                       "final_K")}}, sort_keys=True))
    return EXIT_OK


# --- evaluate ---------------------------------------------------------------------------


def cmd_evaluate(args, extra):
    model, doc = ckpt.load(args.checkpoint)
    base = doc.get("run_config") or C.defaults()
    cfg = dict(base)
    cfg.update({k: C.coerce(k, v) for k, v in parse_overrides(extra).items()})
    ds = build_dataset(cfg)
    splits = ("train", "val", "test") if args.split == "all" else (args.split,)
    name = "accuracy" if model.task.is_classification else "gaussian_nll"
    out = {}
    for s in splits:
        X, y = ds.split(s)
        out[s] = eval_metric(model, X, y) if len(X) else None
    print(json.dumps({"metric": name, **out}, sort_keys=True))
    return EXIT_OK


# --- sweep ------------------------------------------------------------------------------


def parse_grid_arg(text):
    if "=" not in text:
        raise UsageError(f"grid axis {text!r} must look like key=v1,v2")
    key, _, raw = text.partition("=")
    raw = raw.strip()
    if raw.startswith("["):
        values = C.parse_scalar(raw)
        if not isinstance(values, list):
            raise UsageError(f"cannot parse grid values for {key}")
    else:
        values = [C.parse_scalar(v) for v in raw.split(",") if v.strip()]
    return key, values


def expand_grid(grid):
    """Cells (assignments without ``seed``) and the seed list."""
    for key, values in grid.items():
        if key not in C.KEYS:
            raise UsageError(f"unknown grid key {key!r}")
        if not isinstance(values, list) or not values:
            raise UsageError(f"grid axis {key} has no values")
    if not grid:
        raise UsageError("empty grid")
    seeds = grid.get("seed")
    axes = [(k, v) for k, v in grid.items() if k != "seed"]
    cells = [dict(zip([k for k, _ in axes], combo))
             for combo in itertools.product(*[v for _, v in axes])]
    return cells, seeds


def _run_cell(job):
    cfg, out_dir = job
    try:
        return run_training(cfg, out_dir)
    except DivergedError as exc:
        return {"status": "diverged", "message": str(exc)}


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return float("nan"), float("nan")
    return float(np.mean(vals)), float(np.std(vals))


def cmd_sweep(args, extra):
    base, grid = resolve_config(args.config, extra)
    for g in args.grid or []:
        k, v = parse_grid_arg(g)
        grid[k] = v
    cells, seeds = expand_grid(grid)
    seeds = seeds or [base["seed"]]
    out = args.out or "sweep"
    os.makedirs(out, exist_ok=True)
    jobs, index = [], []
    for ci, cell in enumerate(cells):
        for seed in seeds:
            cfg = C.resolve({**base, **cell, "seed": seed}, env={})
            run_dir = os.path.join(out, f"run-{len(jobs):04d}")
            jobs.append((cfg, run_dir))
            index.append((ci, seed, run_dir))
    log.info("sweep: %d cells x %d seeds = %d runs", len(cells), len(seeds), len(jobs))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]

    run_rows = []
    for (ci, seed, run_dir), res in zip(index, results):
        row = {"cell": ci, **{k: _fmt_cell(v) for k, v in cells[ci].items()}, "seed": seed,
               "run_dir": run_dir, "status": res["status"],
               "val": res.get("best_val_metric"), "test": res.get("best_test_metric"),
               "total_K": sum(res["final_K"]) if res.get("final_K") else None,
               "epochs": res.get("epochs_run")}
        run_rows.append(row)
    write_rows(run_rows, os.path.join(out, "runs.csv"))

    higher_better = base["data.task"] == "classification"  # accuracy, else Gaussian NLL
    summary = []
    for ci, cell in enumerate(cells):
        rows = [r for r in run_rows if r["cell"] == ci]
        vm, vs = _mean_std([r["val"] for r in rows])
        tm, ts = _mean_std([r["test"] for r in rows])
        km, ks = _mean_std([r["total_K"] for r in rows])
        summary.append({"cell": ci, **{k: _fmt_cell(v) for k, v in cell.items()},
                        "runs": len(rows), "diverged": sum(r["status"] != "ok" for r in rows),
                        "val_mean": vm, "val_std": vs, "test_mean": tm, "test_std": ts,
                        "total_K_mean": km, "total_K_std": ks,
                        "test": f"{100 * tm:.2f} ± {100 * ts:.2f}" if higher_better
                        else f"{tm:.4f} ± {ts:.4f}",
                        "best": ""})
    finite = [s for s in summary if np.isfinite(s["val_mean"])]
    if finite:
        pick = max if higher_better else min
        pick(finite, key=lambda s: s["val_mean"])["best"] = "*"
    write_rows(summary, os.path.join(out, "summary.csv"))
    print(f"{len(jobs)} runs, {len(cells)} cells; summary in {os.path.join(out, 'summary.csv')}")
    return EXIT_OK


def _fmt_cell(v):
    return json.dumps(v) if isinstance(v, list) else v


# --- probe ------------------------------------------------------------------------------


def _probe_data(doc, extra, rows):
    cfg = dict(doc.get("run_config") or C.defaults())
    cfg.update({k: C.coerce(k, v) for k, v in parse_overrides(extra).items()})
    ds = build_dataset(cfg)
    X, y = ds.split("train")
    return X[:rows], y[:rows], cfg


def cmd_probe(args, extra):
    kind = args.kind
    if kind not in probes.PROBE_KINDS:
        raise UsageError(f"unknown probe {kind!r}; valid kinds: {', '.join(probes.PROBE_KINDS)}")
    model = doc = None
    if args.checkpoint:
        model, doc = ckpt.load(args.checkpoint)
    needs_model = kind in ("lipschitz", "gradcheck")
    if needs_model and model is None:
        raise UsageError(f"probe {kind} needs --checkpoint")

    if kind == "window-shape":
        if args.lam is not None or model is None:
            lam = 3.0 if args.lam is None else args.lam
            windows = probes.single_window(lam, args.beta, args.gamma, args.side)
        else:
            windows = probes.windows_of(model)
        rows = probes.window_shape_rows(windows)
    elif kind == "basis-orthogonality":
        if args.family or model is None:
            fam = BasisFamily.parse(args.family or "chebyshev")
            n = args.n or (9 if fam.kind == "fourier" else 8)
            specs = [("-", fam, n)]
        else:
            specs = [(i, l.family, args.n or l.K) for i, l in enumerate(model.kan_layers)]
        rows = probes.orthogonality_rows(specs)
    elif kind == "lipschitz":
        X, y, cfg = _probe_data(doc, extra, args.rows)
        priors = make_priors(model, C.to_train_config(cfg))
        rows = probes.lipschitz_rows(model, X, y, priors, args.k_min, args.k_max, args.scheme)
        worst = max(r["ratio_prior"] - r["bound_M"] for r in rows)
        log.info("lipschitz: max(ratio - M) = %.6g", worst)
    elif kind == "gradcheck":
        X, y, cfg = _probe_data(doc, extra, 4 * args.rows)
        priors = make_priors(model, C.to_train_config(cfg))
        rows = probes.elbo_gradcheck_rows(model, X, y, priors, rows=args.rows)
        if rows:
            print(f"max rel error {max(r['rel_error'] for r in rows):.3e}", file=sys.stderr)
    elif kind == "convergence":
        rep = proptests.run_convergence_suite()
        rows = [{"check": c["name"], "passed": c["passed"], "worst": c["worst"],
                 "bound": c["bound"]} for c in rep.children]
        print(json.dumps({"name": rep.name, "passed": rep.passed, "worst": rep.worst}),
              file=sys.stderr)
    else:
        rep = proptests.run_firstorder_suite()
        rows = rep.rows
        print(json.dumps({"name": rep.name, "passed": rep.passed, "worst": rep.worst}),
              file=sys.stderr)
    write_rows(rows, args.out)
    return EXIT_OK


# --- entry point ------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="infkan", description="Adaptive-basis KAN training and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("name")
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split-seed", type=int)
    g.add_argument("--task", default="classification", choices=("classification", "regression"))
    g.add_argument("--out")

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config")
    t.add_argument("--out")

    e = sub.add_parser("evaluate", help="score a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--split", default="test", choices=("train", "val", "test", "all"))

    s = sub.add_parser("sweep", help="grid of training runs with a summary table")
    s.add_argument("--config")
    s.add_argument("--grid", action="append", help="key=v1,v2 (repeatable)")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)

    q = sub.add_parser("probe", help="diagnostics emitted as CSV")
    q.add_argument("kind")
    q.add_argument("--checkpoint")
    q.add_argument("--out")
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--beta", type=float, default=2.0)
    q.add_argument("--gamma", type=float, default=1.0)
    q.add_argument("--side", default="symmetric", choices=("symmetric", "one_sided"))
    q.add_argument("--family")
    q.add_argument("--n", type=int)
    q.add_argument("--k-min", type=int, default=3)
    q.add_argument("--k-max", type=int, default=15)
    q.add_argument("--scheme", default="lazy", choices=("lazy", "pinv", "linear"))
    q.add_argument("--rows", type=int, default=64)
    return p


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep, "probe": cmd_probe}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.command == "generate":
            if extra:
                raise UsageError(f"unexpected arguments {' '.join(extra)}")
            return cmd_generate(args)
        return COMMANDS[args.command](args, extra)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InfKanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
