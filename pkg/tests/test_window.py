import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infkan import autodiff as ad
from infkan.autodiff import Tensor
from infkan.window import (WindowParams, effective_order, lambda_for_order, order_for_lambda,
                           positions, weight_function, window_mass, window_values)


def W(lam, side="symmetric", beta=2.0, gamma=1.0):
    return WindowParams(Tensor(float(lam), requires_grad=True), beta, gamma, side)


def test_center_value_at_three():
    p = W(3.0)
    vals = window_values(p).data
    center = vals[len(vals) // 2]
    assert center == pytest.approx(1 / (1 + math.exp(-6)), abs=1e-15)
    assert center == pytest.approx(0.997527, abs=1e-6)


def test_one_sided_zero_lambda():
    vals = window_values(W(0.0, "one_sided")).data
    np.testing.assert_array_equal(vals, [0.5])


def test_symmetry_of_weight_function():
    assert weight_function(4, 2.0) == weight_function(-4, 2.0)
    vals = window_values(W(2.0)).data
    np.testing.assert_array_equal(vals, vals[::-1])


@pytest.mark.parametrize("lam,side,K", [(2.0, "symmetric", 5), (2.3, "symmetric", 7),
                                        (4.0, "one_sided", 5), (0.0, "symmetric", 1),
                                        (0.01, "one_sided", 2)])
def test_effective_order(lam, side, K):
    assert effective_order(W(lam, side)) == K


def test_order_lambda_round_trip():
    for K in (1, 3, 5, 7, 21):
        assert order_for_lambda(lambda_for_order(K, "symmetric"), "symmetric") == K
    for K in (1, 2, 6):
        assert order_for_lambda(lambda_for_order(K, "one_sided"), "one_sided") == K
    with pytest.raises(ValueError):
        lambda_for_order(4, "symmetric")


def test_positions():
    np.testing.assert_array_equal(positions(5, "symmetric"), [-2, -1, 0, 1, 2])
    np.testing.assert_array_equal(positions(3, "one_sided"), [0, 1, 2])


def test_mass_examples():
    assert window_mass(W(0.0)) == 0.5
    assert window_mass(W(5.0)) > window_mass(W(3.0)) > window_mass(W(1.0))


def test_mass_derivative_positive():
    for lam in range(1, 11):
        p = W(float(lam))
        m = ad.sum(window_values(p))
        ad.backward(m)
        assert p.lambda_bar.grad > 0
        # finite-difference oracle on the smooth factor, grid held fixed
        K = len(positions(effective_order(p), p.side))
        x = positions(K, p.side)
        h = 1e-6
        fd = (weight_function(x, lam + h).sum() - weight_function(x, lam - h).sum()) / (2 * h)
        assert p.lambda_bar.grad == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("side", ["symmetric", "one_sided"])
@pytest.mark.parametrize("beta", [1.0, 2.0, 4.0])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_mass_strictly_increasing(side, beta, gamma):
    lams = [0.5 * j for j in range(1, 41)]
    masses = [window_mass(W(l, side, beta, gamma), dps=60) for l in lams]
    assert all(b > a for a, b in zip(masses, masses[1:]))
    # float64 agrees wherever it can resolve the step, and never decreases
    floats = [window_mass(W(l, side, beta, gamma)) for l in lams]
    assert all(b >= a for a, b in zip(floats, floats[1:]))
    for a, b, fa, fb in zip(masses, masses[1:], floats, floats[1:]):
        if b - a > 1e-13 * b:
            assert fb > fa


def test_mass_float_and_high_precision_agree():
    for lam in (0.5, 2.0, 7.5):
        p = W(lam)
        assert float(window_mass(p, dps=40)) == pytest.approx(window_mass(p), rel=1e-14)


def test_half_at_shoulder():
    for lam in [0.5, 1.0, 2.0, 3.7, 10.0]:
        for beta in [1.0, 2.0, 4.0]:
            assert weight_function(lam, lam, beta, 1.0) == 0.5


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 30.0), st.sampled_from(["symmetric", "one_sided"]),
       st.floats(0.5, 4.0), st.floats(0.5, 2.0))
def test_values_in_unit_interval(lam, side, beta, gamma):
    v = window_values(W(lam, side, beta, gamma)).data
    assert np.all(v > 0) and np.all(v <= 1)
    # strictly below 1 whenever float64 can tell sigmoid(beta * lam) from 1
    if beta * lam < 30:
        assert np.all(v < 1)


def test_clamp():
    p = W(1.0)
    p.lambda_bar.data = np.array(-0.3)
    p.clamp()
    assert p.lambda_value == 0.0


def test_invalid_params():
    with pytest.raises(ValueError):
        WindowParams(Tensor(1.0), beta=0.0)
    with pytest.raises(ValueError):
        WindowParams(Tensor(1.0), side="left")
    with pytest.raises(ValueError):
        WindowParams(Tensor(-1.0))
