"""Does the learned basis count depend on where it starts?

Three runs on the spiral differ only in the initial lambda_bar (2, 5, 10).
Early stopping is off: the orders keep drifting after validation accuracy
saturates, so the whole epoch budget is used.  Final per-layer orders are
printed side by side.

    python3 demos/order_from_any_start.py [epochs]
"""

import sys

from infkan.data import gen_spiral
from infkan.train import TrainConfig, fit

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
ds = gen_spiral(2000, 2, 0.1, seed=0)
rows = []
for mu in (2.0, 5.0, 10.0):
    cfg = TrainConfig(basis="chebyshev", layers=[16, 16], patience=0, epochs=epochs,
                      lambda_init=mu, seed=0)
    res = fit(ds, cfg)
    last = res.records[-1]
    rows.append((mu, res.records[0].K, last.K, last.lambda_bar, last.val_metric))
    print(f"mu={mu:4.1f}: K {rows[-1][1]} -> {last.K} after {len(res.records)} epochs "
          f"(val {last.val_metric:.3f})")

for layer in range(len(rows[0][2])):
    ks = [r[2][layer] for r in rows]
    print(f"layer {layer}: final K {ks}, spread {max(ks) - min(ks)}")
