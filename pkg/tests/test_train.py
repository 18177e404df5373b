import json
import math

import numpy as np
import pytest

from infkan import autodiff as ad
from infkan.data import Dataset, gen_double_moons
from infkan.errors import DataError, DivergedError
from infkan.models import MlpModel, Task, build_baseline_mlp, build_kan
from infkan.optim import AdamW
from infkan.train import TrainConfig, evaluate, fit, refresh_orders, train


@pytest.fixture(scope="module")
def moons():
    return gen_double_moons(200, 0.1, seed=0)


def small(**kw):
    base = dict(epochs=3, layers=[4, 2], batch_size=32, patience=0)
    base.update(kw)
    return TrainConfig(**base)


@pytest.mark.parametrize("bad", [dict(epochs=0), dict(learning_rate=-1), dict(eta=0.0),
                                 dict(sigma=-1.0), dict(batch_size=0), dict(model_kind="rnn"),
                                 dict(patience=-1), dict(fixed_order=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


def test_default_hyperparameters():
    c = TrainConfig()
    assert (c.epochs, c.learning_rate, c.weight_decay) == (1000, 1e-2, 1e-5)
    assert c.betas == (0.9, 0.999) and c.adam_eps == 1e-8 and c.patience == 100


def test_zero_learning_rate_changes_nothing(moons):
    cfg = small(learning_rate=0.0, epochs=4)
    model = build_kan(2, [4, 2], moons.task, "relu", rng=np.random.default_rng(0))
    before = [p.data.copy() for p in model.parameters()]
    res = fit(moons, cfg, model=model)
    after = res.final_model.parameters()
    for a, b in zip(before, after):
        np.testing.assert_array_equal(a, b.data)
    assert all(r.K == res.records[0].K for r in res.records)


def test_same_seed_same_records(moons):
    a = train(moons, small(seed=5))[1]
    b = train(moons, small(seed=5))[1]
    assert [r.metrics_row() for r in a] == [r.metrics_row() for r in b]
    c = train(moons, small(seed=6))[1]
    assert [r.metrics_row() for r in a] != [r.metrics_row() for r in c]


def test_records_schema(moons):
    seen = []
    model, recs = train(moons, small(), on_epoch=seen.append)
    assert seen == recs and len(recs) == 3
    row = recs[0].metrics_row()
    assert "wall_time" not in row and row["schema_version"] == 1
    assert set(row["elbo"]) == {"nll", "lambda_term", "theta_term", "total"}
    json.dumps(row)
    for r in recs:
        assert 0.0 <= r.train_metric <= 1.0
        assert r.n_params == sum(a * b * K + 1 for (a, b), K in zip([(2, 4), (4, 2)], r.K))


def test_early_stopping_restores_best(moons):
    res = fit(moons, small(epochs=200, patience=3, learning_rate=0.0))
    # only the running normalisation statistics move, so validation stalls fast
    assert len(res.records) < 200
    vals = [r.val_metric for r in res.records]
    first_best = vals.index(max(vals))
    strict = [i for i in range(len(vals)) if vals[i] > max(vals[:i], default=-1)]
    assert len(res.records) == strict[-1] + 1 + 3
    # ties with the best refresh the stored copy
    assert res.best_epoch == max(i for i, v in enumerate(vals) if v == vals[first_best])


def test_best_model_matches_best_epoch(moons):
    res = fit(moons, small(epochs=25, patience=5, seed=1))
    X, y = moons.split("val")
    best = max(r.val_metric for r in res.records)
    assert evaluate(res.model, X, y) == best
    assert res.records[res.best_epoch].val_metric == best


def test_divergence_reports_last_good_epoch(moons):
    cfg = small(epochs=50, learning_rate=1e306, grad_clip=0.0)
    with pytest.raises(DivergedError) as e, np.errstate(all="ignore"):
        fit(moons, cfg)
    assert e.value.last_good_epoch >= -1
    assert len(e.value.records) == e.value.last_good_epoch + 1


def test_fixed_kan_never_resizes(moons):
    res = fit(moons, small(model_kind="fixed", fixed_order=5, epochs=5, learning_rate=0.5))
    assert all(r.K == [5, 5] for r in res.records)
    assert all(not r.resized for r in res.records)


def test_resize_bookkeeping():
    task = Task("classification", 2)
    model = build_kan(2, [3, 2], task, "relu", lambda_init=2.0, rng=np.random.default_rng(0))
    opt = AdamW(model.parameters())
    model.layers[0].window.lambda_bar.data = np.array(3.5)
    model.layers[1].window.lambda_bar.data = np.array(0.5)
    assert refresh_orders(model, opt, np.random.default_rng(0))
    assert model.orders() == [9, 3]
    assert model.n_params() == 2 * 3 * 9 + 1 + 3 * 2 * 3 + 1
    for layer in model.layers:
        i = opt._index(layer.theta)
        assert opt.m[i].shape == layer.theta.shape == opt.v[i].shape
    assert not refresh_orders(model, opt, np.random.default_rng(0))


def test_lambda_clamped_non_negative():
    ds = gen_double_moons(100, 0.1, seed=2)
    res = fit(ds, small(lambda_init=0.05, learning_rate=0.5, epochs=5))
    assert all(l >= 0 for r in res.records for l in r.lambda_bar)


def test_evaluate_examples():
    task = Task("classification", 2)
    X = np.random.default_rng(0).normal(size=(10, 2))
    y = np.array([0, 1, 1, 0, 1, 1, 1, 0, 1, 1])
    mlp = MlpModel(2, [4], task)
    # zero weights and a bias favouring class 1: constant predictor
    mlp.layers[-1].b.data = np.array([0.0, 1.0])
    assert evaluate(mlp, X, y) == pytest.approx(np.mean(y == 1))
    # memoriser: one-hot of the label in the first feature, identity head
    memo = MlpModel(2, [2], task, activation="relu")
    memo.layers[0].W.data = np.eye(2)
    memo.layers[1].W.data = np.eye(2)
    Xm = np.eye(2)[y] * 5.0
    assert evaluate(memo, Xm, y) == 1.0
    with pytest.raises(DataError):
        evaluate(memo, np.zeros((0, 2)), np.zeros(0))


def test_mlp_shape_and_gradient():
    task = Task("classification", 3)
    mlp = build_baseline_mlp(4, [32], task, activation="tanh", rng=np.random.default_rng(1))
    X = np.random.default_rng(2).normal(size=(6, 4))
    y = np.array([0, 1, 2, 0, 1, 2])
    assert mlp.forward(X).shape == (6, 3)

    def f(*_):
        return mlp.data_nll(mlp.forward(X), y)

    assert ad.gradcheck(f, mlp.parameters()) < 1e-4


def test_regression_training_runs():
    X = np.random.default_rng(0).uniform(-1, 1, size=(120, 1))
    ds = Dataset(X, np.sin(3 * X), Task("regression", 1))
    res = fit(ds, small(layers=[4], basis="chebyshev", epochs=30))
    assert res.records[-1].train_metric < res.records[0].train_metric
    assert all(math.isfinite(r.val_metric) for r in res.records)


def test_metrics_row_does_not_alias_record(moons):
    recs = train(moons, small())[1]
    row = recs[0].metrics_row()
    row["K"].append(99)
    assert 99 not in recs[0].K
