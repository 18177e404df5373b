"""Train an adaptive-order KAN on the two-arm spiral and watch the basis count.

The per-layer order K starts from ceil(lambda_init) and moves as lambda_bar is
learned.  Every 25 epochs we print accuracy, K and lambda_bar; at the end the
best-by-validation model is scored on the held-out split.

    python3 demos/train_spiral.py [seed]
"""

import sys
import time

from infkan.data import gen_spiral
from infkan.train import TrainConfig, evaluate, fit

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
ds = gen_spiral(2000, 2, 0.1, seed=seed)
cfg = TrainConfig(basis="chebyshev", layers=[16, 16], patience=300, seed=seed)


def show(rec):
    if rec.epoch % 25 == 0:
        lams = ", ".join(f"{l:.2f}" for l in rec.lambda_bar)
        print(f"epoch {rec.epoch:4d}  train {rec.train_metric:.3f}  val {rec.val_metric:.3f}"
              f"  K {rec.K}  lambda_bar [{lams}]")


t0 = time.perf_counter()
res = fit(ds, cfg, on_epoch=show)
X, y = ds.split("test")
print(f"\nstopped after {len(res.records)} epochs ({time.perf_counter() - t0:.0f}s); "
      f"best epoch {res.best_epoch}")
print(f"test accuracy of the restored model: {evaluate(res.model, X, y):.4f}")
print(f"final orders {res.model.orders()}, parameters {res.model.n_params()}")
