import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infkan import proptests as P


@pytest.fixture(scope="module")
def convergence():
    return P.run_convergence_suite()


def test_convergence_suite_passes(convergence):
    assert convergence.passed
    assert convergence.worst <= 1e-10
    assert len(convergence.children) == 3 * 21
    json.loads(convergence.to_json())


def test_reference_function_monotone(convergence):
    for child in convergence.children[:2]:
        errs = [r["sup_error"] for r in child["rows"]]
        assert [r["n"] for r in child["rows"]] == [4, 8, 16, 32, 64]
        assert all(b <= a for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("n", [2, 3, 7, 50])
def test_linear_function_exact(n):
    t = np.linspace(-1, 1, 1001)
    assert P.sup_error(lambda x: x, P.linear_approximant, n, t) < 1e-12


def test_step_error_halves():
    # the step error is ~ max|f'| * spacing; knot spacing 2 / (n - 1) roughly halves
    t = np.linspace(-1, 1, 20001)
    f = P.reference_function
    for n in (8, 16, 32, 64):
        ratio = P.sup_error(f, P.step_approximant, n, t) / P.sup_error(f, P.step_approximant, 2 * n, t)
        assert 2 / 1.1 <= ratio <= 2 * 1.1


def test_relu_reconstruction_pointwise_oracle():
    # independent route: evaluate the interpolant segment by segment
    f = P.reference_function
    n = 9
    tk = P.grid(n)
    t = np.linspace(-1, 1, 333)
    seg = np.clip(np.searchsorted(tk, t, side="right") - 1, 0, n - 2)
    frac = (t - tk[seg]) / (tk[seg + 1] - tk[seg])
    expected = (1 - frac) * f(tk[seg]) + frac * f(tk[seg + 1])
    np.testing.assert_allclose(P.relu_reconstruction(f, n, t), expected, atol=1e-12)


def test_report_fails_when_bound_violated():
    # a non-monotone "approximant" must be reported, with the measured rise
    bad = P._monotone_check("bad", P.reference_function,
                            lambda f, n, t: f(t) + 1.0 / (65 - n), (4, 8, 16, 32, 64),
                            np.linspace(-1, 1, 11))
    assert not bad.passed and bad.worst > 0


def test_firstorder_suite():
    rep = P.run_firstorder_suite()
    assert rep.passed and rep.worst <= 3.0
    by = {(r["f"], r["s"]): r for r in rep.rows}
    assert by[("x^2", 1.0)]["gap"] == pytest.approx(1.0, abs=3 * by[("x^2", 1.0)]["stderr"])
    assert by[("x^2", 0.0)]["gap"] == 0.0
    assert by[("3x-1", 0.0)]["gap"] == 0.0


def test_suites_deterministic():
    a = P.run_firstorder_suite(n_samples=10_000, seed=3)
    b = P.run_firstorder_suite(n_samples=10_000, seed=3)
    assert a.to_json() == b.to_json()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 1000))
def test_reconstruction_on_random_trig(n, seed):
    (f,) = P.random_trig_polys(1, seed)
    t = np.linspace(-1, 1, 257)
    diff = np.abs(P.relu_reconstruction(f, n, t) - P.linear_approximant(f, n, t))
    assert diff.max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 3))
def test_quadratic_gap_is_variance(mu, s):
    gap, se = P.firstorder_gap(lambda x: x ** 2, mu, s, 200_000, np.random.default_rng(0))
    assert abs(gap - s * s) <= 5 * se + 1e-12
    assert math.isfinite(se)
