"""Executable checks of the approximation results behind the method.

Two suites:

* convergence: step and piecewise-linear approximants of a continuous f on
  [-1, 1] built on n uniform knots, their sup-norm error as n grows, and the
  reconstruction of the piecewise-linear interpolant as a sum of ReLU ramps
  ``f(t_1) + sum_k [g(t - t_k) - g(t - t_{k+1})] (f(t_{k+1}) - f(t_k)) / d_k``.
* first-order: the gap E[f(x)] - f(mu) for x ~ N(mu, s^2), which for f = x^2
  is exactly s^2 (the curvature term the mean-field shortcut drops).

Each suite returns a :class:`PropertyReport` carrying the measured worst case,
not only a verdict.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

DEFAULT_NS = (4, 8, 16, 32, 64)
RECON_TOL = 1e-10
MONO_SLACK = 1e-12


@dataclass
class PropertyReport:
    name: str
    params: dict
    passed: bool
    worst: float  # the measured quantity compared against ``bound``
    bound: float
    rows: list = field(default_factory=list)
    children: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def reference_function(t):
    return np.sin(3.0 * t) + t ** 2


def random_trig_polys(count, seed, degree=3):
    """``count`` functions sum_j a_j cos(j t) + b_j sin(j t), j = 0..degree."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.normal(size=degree + 1) / np.arange(1, degree + 2)
        b = rng.normal(size=degree + 1) / np.arange(1, degree + 2)

        def f(t, a=a, b=b):
            t = np.asarray(t, dtype=np.float64)
            j = np.arange(len(a))
            return np.cos(np.multiply.outer(t, j)) @ a + np.sin(np.multiply.outer(t, j)) @ b

        out.append(f)
    return out


def grid(n):
    return np.linspace(-1.0, 1.0, n)


def step_approximant(f, n, t):
    """Left-endpoint step function; t = 1 takes the last knot value."""
    tk = grid(n)
    t = np.asarray(t, dtype=np.float64)
    idx = np.clip(np.searchsorted(tk, t, side="right") - 1, 0, n - 1)
    return f(tk)[idx]


def linear_approximant(f, n, t):
    tk = grid(n)
    return np.interp(t, tk, f(tk))


def relu_reconstruction(f, n, t):
    """The interpolant written as a combination of shifted ReLUs."""
    tk = grid(n)
    fk = f(tk)
    t = np.asarray(t, dtype=np.float64)
    out = np.full_like(t, fk[0])
    for k in range(n - 1):
        slope = (fk[k + 1] - fk[k]) / (tk[k + 1] - tk[k])
        ramp = np.maximum(0.0, t - tk[k]) - np.maximum(0.0, t - tk[k + 1])
        out = out + ramp * slope
    return out


def sup_error(f, approx, n, points):
    return float(np.max(np.abs(approx(f, n, points) - f(points))))


def _monotone_check(label, f, approx, ns, points):
    errs = [sup_error(f, approx, n, points) for n in ns]
    rises = [max(0.0, b - a) for a, b in zip(errs[:-1], errs[1:])]
    worst = max(rises) if rises else 0.0
    return PropertyReport(
        name=f"{label} sup error non-increasing",
        params={"n": list(ns)},
        passed=worst <= MONO_SLACK,
        worst=worst,
        bound=MONO_SLACK,
        rows=[{"n": n, "sup_error": e} for n, e in zip(ns, errs)],
    )


def _recon_check(label, f, ns, points):
    rows = []
    for n in ns:
        d = float(np.max(np.abs(relu_reconstruction(f, n, points) - linear_approximant(f, n, points))))
        rows.append({"n": n, "max_abs_diff": d})
    worst = max(r["max_abs_diff"] for r in rows)
    return PropertyReport(
        name=f"{label} relu reconstruction",
        params={"n": list(ns)},
        passed=worst <= RECON_TOL,
        worst=worst,
        bound=RECON_TOL,
        rows=rows,
    )


def run_convergence_suite(ns=DEFAULT_NS, n_points=1001, n_random=20, seed=0):
    """Sup-norm monotonicity and ReLU reconstruction on the reference and
    ``n_random`` random trigonometric polynomials."""
    ns = tuple(int(n) for n in ns)
    points = np.linspace(-1.0, 1.0, n_points)
    funcs = [("sin(3t)+t^2", reference_function)]
    funcs += [(f"trig[{i}]", f) for i, f in enumerate(random_trig_polys(n_random, seed))]
    children = []
    for label, f in funcs:
        children.append(_monotone_check(f"{label} step", f, step_approximant, ns, points))
        children.append(_monotone_check(f"{label} linear", f, linear_approximant, ns, points))
        children.append(_recon_check(label, f, ns, points))
    mono = [c for c in children if "non-increasing" in c.name]
    recon = [c for c in children if "reconstruction" in c.name]
    return PropertyReport(
        name="convergence",
        params={"n": list(ns), "points": n_points, "random_functions": n_random, "seed": seed},
        passed=all(c.passed for c in children),
        worst=max(c.worst for c in recon),
        bound=RECON_TOL,
        rows=[
            {"check": "monotone", "worst_rise": max(c.worst for c in mono),
             "failures": sum(not c.passed for c in mono)},
            {"check": "reconstruction", "worst_abs_diff": max(c.worst for c in recon),
             "failures": sum(not c.passed for c in recon)},
        ],
        children=[c.to_dict() for c in children],
    )


def firstorder_gap(f, mu, s, n_samples, rng):
    """Monte-Carlo estimate of E[f(x)] - f(mu) and its standard error."""
    if s == 0:
        return 0.0, 0.0
    x = rng.normal(mu, s, size=n_samples)
    fx = f(x)
    return float(np.mean(fx) - f(mu)), float(np.std(fx, ddof=1) / math.sqrt(n_samples))


def run_firstorder_suite(mu=0.5, s_values=(0.0, 0.5, 1.0, math.sqrt(2.0), math.sqrt(5.0)),
                         n_samples=1_000_000, seed=0, z=3.0):
    """Gap of the first-order shortcut for x^2 (expected s^2) and for an affine
    function (expected 0), each within ``z`` Monte-Carlo standard errors.

    The s values include sqrt(lambda) for lambda in {2, 5}: the spread of a
    Poisson count at typical window sizes.
    """
    rng = np.random.default_rng(seed)
    cases = (("x^2", lambda x: np.asarray(x) ** 2, lambda s: s * s),
             ("3x-1", lambda x: 3.0 * np.asarray(x) - 1.0, lambda s: 0.0))
    rows, worst_z = [], 0.0
    for label, f, expected in cases:
        for s in s_values:
            gap, se = firstorder_gap(f, mu, s, n_samples, rng)
            dev = abs(gap - expected(s))
            zs = 0.0 if dev == 0 else (math.inf if se == 0 else dev / se)
            worst_z = max(worst_z, zs)
            rows.append({"f": label, "s": s, "gap": gap, "expected": expected(s),
                         "stderr": se, "z": zs})
    return PropertyReport(
        name="first-order gap",
        params={"mu": mu, "s": list(s_values), "samples": n_samples, "seed": seed},
        passed=worst_z <= z,
        worst=worst_z,
        bound=z,
        rows=rows,
    )
