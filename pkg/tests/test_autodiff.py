import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infkan import autodiff as ad
from infkan.autodiff import Tensor, backward, gradcheck
from infkan.errors import DataError, NumericError, ShapeError


def test_matmul_by_hand():
    out = ad.matmul(Tensor([[1, 2], [3, 4]]), Tensor([[1], [1]]))
    np.testing.assert_array_equal(out.data, [[3], [7]])


def test_relu_and_sigmoid_values():
    assert ad.relu(Tensor(-2.0)).item() == 0.0
    assert ad.sigmoid(Tensor(0.0)).item() == 0.5


def test_backward_square_sum():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    backward(ad.sum(x * x))
    np.testing.assert_allclose(x.grad, [2, 4, 6])


def test_backward_sigmoid_at_zero():
    w = Tensor(0.0, requires_grad=True)
    backward(ad.sigmoid(w))
    assert w.grad == pytest.approx(0.25)


def test_non_scalar_root_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x * 2)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        ad.add(Tensor(np.ones(3)), Tensor(np.ones(4)))
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_non_finite_input():
    with pytest.raises(NumericError):
        Tensor([1.0, np.nan])
    with pytest.raises(NumericError):
        ad.log(Tensor([0.0]))


def test_shared_use_accumulates():
    # f(x) = x * x must match f(x, y) = x * y at x = y, summed over both slots
    x = Tensor(1.7, requires_grad=True)
    backward(x * x)
    a = Tensor(1.7, requires_grad=True)
    b = Tensor(1.7, requires_grad=True)
    backward(a * b)
    assert x.grad == pytest.approx(a.grad + b.grad)


def test_inputs_not_mutated():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    a0, b0 = a.data.copy(), b.data.copy()
    backward(ad.sum(ad.tanh(ad.matmul(a, b))))
    np.testing.assert_array_equal(a.data, a0)
    np.testing.assert_array_equal(b.data, b0)


def test_tape_is_released():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = ad.mul(x, x)
    z = ad.sum(y)
    backward(z)
    assert z._parents == () and y._parents == ()


def test_leaf_grads_accumulate_across_calls():
    x = Tensor(3.0, requires_grad=True)
    backward(x * 2)
    backward(x * 2)
    assert x.grad == pytest.approx(4.0)


# --- per-op finite-difference checks ---------------------------------------------------

def _away_from(values, kinks, margin=1e-3):
    v = values.copy()
    for k in kinks:
        close = np.abs(v - k) < margin
        v[close] = k + 2 * margin
    return v


UNARY = {
    "abs": (ad.abs, [0.0]),
    "tanh": (ad.tanh, []),
    "sigmoid": (ad.sigmoid, []),
    "cos": (ad.cos, []),
    "sin": (ad.sin, []),
    "exp": (ad.exp, []),
    "relu": (ad.relu, [0.0]),
    "leaky_relu": (ad.leaky_relu, [0.0]),
    "silu": (ad.silu, []),
    "gelu": (ad.gelu, []),
    "relu6": (lambda t: ad.relu6(ad.scale(t, 4.0)), [0.0, 1.5]),
    "clamp": (lambda t: ad.clamp(t, -0.5, 0.7), [-0.5, 0.7]),
    "scale": (lambda t: ad.scale(t, -3.0), []),
    "neg": (ad.neg, []),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name):
    fn, kinks = UNARY[name]
    rng = np.random.default_rng(hash(name) % 2 ** 32)
    for _ in range(10):
        x = Tensor(_away_from(rng.uniform(-2, 2, size=(3, 4)), kinks), requires_grad=True)
        w = rng.normal(size=(3, 4))
        err = gradcheck(lambda t: ad.sum(ad.mul(fn(t), w)), [x])
        assert err < 1e-5, name


def test_positive_domain_op_gradients():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = Tensor(rng.uniform(0.2, 3.0, size=5), requires_grad=True)
        for fn in (ad.log, ad.sqrt, ad.lgamma, lambda t: ad.power(t, -0.5)):
            assert gradcheck(lambda t: ad.sum(fn(t)), [x]) < 1e-5


def test_prelu_gradient_includes_slope():
    rng = np.random.default_rng(2)
    x = Tensor(_away_from(rng.normal(size=(4, 3)), [0.0]), requires_grad=True)
    a = Tensor(0.25, requires_grad=True)
    w = rng.normal(size=(4, 3))
    assert gradcheck(lambda t, s: ad.sum(ad.mul(ad.prelu(t, s), w)), [x, a]) < 1e-5


BINARY = {
    "add": ad.add,
    "sub": ad.sub,
    "mul": ad.mul,
    "div": ad.div,
}


@pytest.mark.parametrize("name", sorted(BINARY))
@pytest.mark.parametrize("shapes", [((3, 4), (3, 4)), ((3, 4), (4,)), ((3, 1), (1, 4))])
def test_binary_broadcast_gradients(name, shapes):
    rng = np.random.default_rng(3)
    fn = BINARY[name]
    a = Tensor(rng.uniform(0.5, 2.0, size=shapes[0]), requires_grad=True)
    b = Tensor(rng.uniform(0.5, 2.0, size=shapes[1]), requires_grad=True)
    assert gradcheck(lambda x, y: ad.sum(ad.tanh(fn(x, y))), [a, b]) < 1e-5


def test_structural_op_gradients():
    rng = np.random.default_rng(4)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    c = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    w = rng.normal(size=(3, 6))

    def f(a, b, c):
        m = ad.matmul(a, b)
        cat = ad.concat([m, c, ad.index_select(m, [1, 0], axis=1)], axis=1)
        st_ = ad.stack([ad.mean(cat, axis=0), ad.sum(cat, axis=0)], axis=0)
        r = ad.reshape(ad.transpose(cat), (6, 3))
        return ad.sum(ad.mul(ad.transpose(r), w)) + ad.sum(ad.sin(st_))

    assert gradcheck(f, [a, b, c]) < 1e-5


# --- losses --------------------------------------------------------------------------

def test_cross_entropy_uniform_is_ln2():
    assert ad.loss_cross_entropy(Tensor([[0.0, 0.0]]), [0]).item() == pytest.approx(math.log(2))


def test_cross_entropy_saturated():
    assert ad.loss_cross_entropy(Tensor([[1000.0, 0.0]]), [0]).item() == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_matches_direct_formula():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(7, 4)) * 3
    labels = rng.integers(0, 4, size=7)
    direct = 0.0
    for row, lab in zip(logits, labels):
        direct += -(row[lab] - math.log(sum(math.exp(v) for v in row)))
    direct /= len(labels)
    assert ad.loss_cross_entropy(Tensor(logits), labels).item() == pytest.approx(direct, abs=1e-12)


def test_cross_entropy_label_range():
    with pytest.raises(DataError):
        ad.loss_cross_entropy(Tensor([[0.0, 1.0]]), [2])


def test_cross_entropy_gradient():
    rng = np.random.default_rng(6)
    logits = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    labels = rng.integers(0, 3, size=5)
    assert gradcheck(lambda t: ad.loss_cross_entropy(t, labels), [logits]) < 1e-5


def test_gaussian_nll_values():
    assert ad.loss_gaussian_nll(Tensor([1.5]), Tensor([1.5])).item() == 0.0
    assert ad.loss_gaussian_nll(Tensor([3.0]), Tensor([1.0])).item() == pytest.approx(2.0)


def test_gaussian_nll_matches_direct_formula():
    rng = np.random.default_rng(7)
    p, t = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
    direct = sum(0.5 * sum((a - b) ** 2 for a, b in zip(pr, tr)) for pr, tr in zip(p, t)) / 6
    assert ad.loss_gaussian_nll(Tensor(p), Tensor(t)).item() == pytest.approx(direct, abs=1e-12)


def test_gaussian_nll_shape_mismatch():
    with pytest.raises(ShapeError):
        ad.loss_gaussian_nll(Tensor(np.ones(3)), Tensor(np.ones(2)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_composite_gradient_random_points(seed):
    # f(x, W) = mean(gelu(x W) * sigmoid(x W)) + cos-sum, at 100 random points
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    W = Tensor(rng.normal(size=(2, 3)), requires_grad=True)

    def f(x, W):
        h = ad.matmul(x, W)
        return ad.mean(ad.mul(ad.gelu(h), ad.sigmoid(h))) + ad.sum(ad.cos(W))

    assert gradcheck(f, [x, W]) < 1e-5
