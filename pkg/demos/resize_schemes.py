"""How much does a change of basis count disturb a trained layer?

A small ReLU-basis KAN is trained on the moons, then its first layer is grown
and shrunk with each coefficient transfer scheme.  We report the largest
change of the layer's edge functions on a dense grid and at the new knots,
plus the data term (mean NLL) and the coefficient prior term of the ELBO.

lambda_bar is left alone, so after growth the outer window weights are small.
pinv divides by them to keep theta * w, which inflates theta and with it the
prior penalty even though the function barely moves.
"""

import copy

import numpy as np

from infkan import basis as B
from infkan.data import gen_double_moons
from infkan.train import TrainConfig, fit
from infkan.variational import Priors, elbo

ds = gen_double_moons(600, 0.1, seed=2)
res = fit(ds, TrainConfig(layers=[8, 2], epochs=150, patience=0, seed=2))
X, y = ds.split("train")
priors = Priors.uniform(2)
base = res.model
br = elbo(base, X, y, priors, len(X), "eval")
print(f"trained orders {base.orders()}: NLL {br.nll:.4f}, theta prior {br.theta_term:.1f}")


def edges(layer, t):
    coef = layer.theta.data * layer.weights().data
    return np.einsum("qpk,nk->nqp", coef, B.basis_values(layer.family, layer.K, t, layer.slope_value))


dense = np.linspace(-1, 1, 801)
K0 = base.layers[0].K
for new_K in (K0 + 4, max(K0 - 2, 3)):
    print(f"\nlayer 0: K {K0} -> {new_K}")
    for scheme in ("pinv", "linear", "lazy"):
        m = copy.deepcopy(base)
        before_dense = edges(m.layers[0], dense)
        before_knots = edges(m.layers[0], B.knots(new_K))
        m.layers[0].resize(new_K, scheme, rng=np.random.default_rng(0))
        d_dense = np.max(np.abs(edges(m.layers[0], dense) - before_dense))
        d_knots = np.max(np.abs(edges(m.layers[0], B.knots(new_K)) - before_knots))
        br = elbo(m, X, y, priors, len(X), "eval")
        print(f"  {scheme:6s} max change: dense grid {d_dense:.2e}, new knots {d_knots:.2e}; "
              f"NLL {br.nll:.4f}, theta prior {br.theta_term:.1f}")
