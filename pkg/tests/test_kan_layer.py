import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infkan import autodiff as ad
from infkan import basis as B
from infkan.autodiff import Tensor
from infkan.basis import BasisFamily
from infkan.errors import ShapeError, UnsupportedError
from infkan.kan_layer import KanLayer, init_variance
from infkan.window import WindowParams

CHEB = BasisFamily("chebyshev")
FOURIER = BasisFamily("fourier")
RELU = BasisFamily("piecewise", "relu")
FAMILIES = [CHEB, FOURIER, RELU]


def make_layer(fam, K, d_in=3, d_out=2, seed=0, lam=None):
    side = fam.default_side
    if lam is None:
        lam = (K - 1) / 2.0 if side == "symmetric" else float(K - 1)
    layer = KanLayer(d_in, d_out, fam, WindowParams(Tensor(lam, requires_grad=True), side=side))
    assert layer.K == K
    layer.init_theta(seed)
    return layer


def naive_forward(layer, x):
    """Direct summation with closed-form bases, one term at a time."""
    mu = x.mean(axis=0)
    var = ((x - mu) ** 2).mean(axis=0)
    z = np.tanh((x - mu) / np.sqrt(var + 1e-5))
    K = layer.K
    lam, beta, gamma = layer.window.lambda_value, layer.window.beta, layer.window.gamma
    if layer.window.side == "symmetric":
        pos = [k - (K - 1) // 2 for k in range(K)]
    else:
        pos = list(range(K))
    w = [1.0 / (1.0 + math.exp(-beta * lam + beta * gamma * abs(p))) for p in pos]
    t = np.linspace(-1, 1, K) if K > 1 else [-1.0]

    def phi(k, v):
        if layer.family.kind == "chebyshev":
            return math.cos(k * math.acos(v))
        if layer.family.kind == "fourier":
            m = math.ceil(k / 2)
            trig = math.sin if k % 2 == 1 else math.cos
            return trig(math.pi * m * v) / math.sqrt(2)
        return max(v - t[k], 0.0)

    theta = layer.theta.data
    out = np.zeros((x.shape[0], layer.d_out))
    for b in range(x.shape[0]):
        for q in range(layer.d_out):
            for p in range(layer.d_in):
                for k in range(K):
                    out[b, q] += theta[q, p, k] * w[k] * phi(k, z[b, p])
    return out


@pytest.mark.parametrize("fam", FAMILIES, ids=str)
def test_matches_triple_loop(fam):
    layer = make_layer(fam, 5, seed=3)
    x = np.random.default_rng(1).normal(size=(7, 3))
    np.testing.assert_allclose(layer.forward(Tensor(x)).data, naive_forward(layer, x), atol=1e-12)


def test_zero_theta_gives_zero():
    layer = make_layer(RELU, 5)
    layer.theta.data[:] = 0.0
    x = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(layer.forward(Tensor(x)).data, 0.0)


def test_constant_chebyshev():
    layer = KanLayer(1, 1, CHEB, WindowParams(Tensor(0.0), side="one_sided"))
    assert layer.K == 1
    layer.theta.data[:] = 2.0
    w0 = 1.0 / (1.0 + math.exp(0.0))
    out = layer.forward(Tensor(np.random.default_rng(0).normal(size=(6, 1)))).data
    np.testing.assert_allclose(out, 2 * w0, atol=1e-15)


def test_shape_error():
    layer = make_layer(CHEB, 3)
    with pytest.raises(ShapeError):
        layer.forward(Tensor(np.zeros((4, 2))))


def test_init_variance_chebyshev_k6():
    assert init_variance(CHEB, 6, 3) == pytest.approx(4 / 4.75)
    layer = KanLayer(100, 1000, CHEB, WindowParams(Tensor(5.0), side="one_sided"))
    assert layer.K == 6
    layer.init_theta(np.random.default_rng(0))
    draws = layer.theta.data.ravel()
    assert len(draws) >= 10 ** 5
    assert np.var(draws) == pytest.approx(0.8421, rel=0.05)
    assert abs(draws.mean()) < 3 * math.sqrt(0.8421) / math.sqrt(len(draws))


def test_init_variance_other_families():
    assert init_variance(RELU, 5, 4) == pytest.approx(2 / 20)
    assert init_variance(CHEB, 1, 4) == 1.0


def test_init_deterministic():
    a, b = make_layer(FOURIER, 5, seed=7), make_layer(FOURIER, 5, seed=7)
    np.testing.assert_array_equal(a.theta.data, b.theta.data)


@pytest.mark.parametrize("scheme", ["pinv", "linear", "lazy"])
@pytest.mark.parametrize("fam", FAMILIES, ids=str)
def test_identity_resize(fam, scheme):
    layer = make_layer(fam, 5)
    before = layer.theta.data.copy()
    if scheme == "linear" and fam.kind != "piecewise":
        with pytest.raises(UnsupportedError):
            layer.resize(7, scheme)
        return
    layer.resize(5, scheme)
    np.testing.assert_array_equal(layer.theta.data, before)


def test_lazy_grow_chebyshev_keeps_prefix():
    layer = make_layer(CHEB, 5)
    before = layer.theta.data.copy()
    layer.resize(7, "lazy", rng=np.random.default_rng(0), lazy_sigma=1.0)
    assert layer.theta.shape == (2, 3, 7)
    np.testing.assert_array_equal(layer.theta.data[..., :5], before)


def _edge_functions(layer):
    """theta * w contracted with the basis at points, per (q, p)."""
    coef = layer.theta.data * layer.weights().data
    K, slope = layer.K, layer.slope_value

    def f(points):
        phi = B.basis_values(layer.family, K, np.asarray(points), slope)
        return np.einsum("qpk,nk->nqp", coef, phi)

    return f


def test_pinv_resize_preserves_values_at_new_knots():
    layer = make_layer(RELU, 5, seed=2)
    before = _edge_functions(layer)
    layer.resize(9, "pinv")
    after = _edge_functions(layer)
    np.testing.assert_allclose(after(B.knots(9)), before(B.knots(9)), atol=1e-8)


def test_pinv_resize_preserves_layer_output_at_knots():
    # feed inputs whose normalised, squashed values land on the new knots
    layer = make_layer(RELU, 5, d_in=1, d_out=2, seed=4)
    z = B.knots(9)[1:-1]
    x = np.arctanh(z)[:, None]
    layer.norm.running_mean[:] = 0.0
    layer.norm.running_var[:] = 1.0 - 1e-5
    y0 = layer.forward(Tensor(x), mode="eval").data
    layer.resize(9, "pinv")
    y1 = layer.forward(Tensor(x), mode="eval").data
    np.testing.assert_allclose(y1, y0, atol=1e-8)


def _kink_free(fam, K, x):
    if fam.kind != "piecewise":
        return True
    mu, sd = x.mean(0), np.sqrt(x.var(0) + 1e-5)
    z = np.tanh((x - mu) / sd)
    return np.min(np.abs(z[..., None] - B.knots(K))) > 1e-3


@pytest.mark.parametrize("K", [3, 5, 9])
@pytest.mark.parametrize("fam", FAMILIES, ids=str)
def test_layer_gradients(fam, K):
    layer = make_layer(fam, K, seed=K)
    seed = 0
    while True:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(5, 3))
        if _kink_free(fam, K, x):
            break
        seed += 1
    xt = Tensor(x, requires_grad=True)
    r = rng.normal(size=(5, 2))
    # lambda kept off integers so the grid does not jump under perturbation
    layer.window.lambda_bar.data = layer.window.lambda_bar.data - 0.3

    def f(theta, lam, xin):
        return ad.sum(ad.mul(layer.forward(xin), r))

    err = ad.gradcheck(f, [layer.theta, layer.window.lambda_bar, xt])
    assert err < 1e-4


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=6), st.sampled_from(["train", "eval"]))
def test_normalised_activations_inside_unit_interval(vals, mode):
    x = np.array(vals)[:, None]
    layer = KanLayer(1, 1, RELU)
    z = ad.tanh(layer.normalize(Tensor(x), mode)).data
    assert np.all(np.isfinite(z))
    assert np.all(np.abs(z) <= 1.0)
    # tanh saturates to exactly +-1 only beyond |u| ~ 19
    u = layer.normalize(Tensor(x), mode).data
    assert np.all(np.abs(z[np.abs(u) < 18]) < 1.0)


def test_running_stats_update_in_train_only():
    layer = make_layer(CHEB, 3)
    x = np.random.default_rng(0).normal(3.0, 2.0, size=(50, 3))
    layer.forward(Tensor(x), mode="eval")
    np.testing.assert_array_equal(layer.norm.running_mean, 0.0)
    layer.forward(Tensor(x), mode="train")
    np.testing.assert_allclose(layer.norm.running_mean, 0.1 * x.mean(0))
    assert np.all(layer.norm.running_var >= 0)
    with ad.no_grad():
        layer.forward(Tensor(x), mode="train")
    np.testing.assert_allclose(layer.norm.running_mean, 0.1 * x.mean(0))


@pytest.mark.parametrize("fam", FAMILIES + [BasisFamily("piecewise", "prelu")], ids=str)
def test_state_round_trip(fam):
    layer = make_layer(fam, 5, seed=1)
    layer.forward(Tensor(np.random.default_rng(0).normal(size=(8, 3))))
    clone = KanLayer.from_state(layer.state())
    x = Tensor(np.random.default_rng(1).normal(size=(4, 3)))
    np.testing.assert_array_equal(clone.forward(x, "eval").data, layer.forward(x, "eval").data)
    assert clone.state() == layer.state()
