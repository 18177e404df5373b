"""A single KAN layer with a learnable basis count.

For an input batch x[b, p] the layer computes

    x~ = tanh(batchnorm(x))
    h[b, q] = sum_{p, k} theta[q, p, k] * w[k] * phi_k(x~[b, p])

where w is the truncated window over basis indices.  Normalisation followed by
tanh keeps every basis argument inside (-1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import basis as B
from . import interp
from .autodiff import Tensor
from .errors import ShapeError, UnsupportedError
from .window import WindowParams, effective_order, window_values

BN_EPS = 1e-5


@dataclass
class NormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1

    @classmethod
    def fresh(cls, d_in, momentum=0.1):
        return cls(np.zeros(d_in), np.ones(d_in), momentum)


@dataclass
class KanLayer:
    d_in: int
    d_out: int
    family: B.BasisFamily = field(default_factory=B.BasisFamily)
    window: WindowParams = None
    learn_lambda: bool = True
    K: int = None
    norm: NormState = None
    prelu_init: float = 0.25

    def __post_init__(self):
        if self.window is None:
            self.window = WindowParams(side=self.family.default_side)
        self.window.lambda_bar.requires_grad = self.learn_lambda
        if self.K is None:
            self.K = effective_order(self.window)
        if self.norm is None:
            self.norm = NormState.fresh(self.d_in)
        self.theta = Tensor(np.zeros((self.d_out, self.d_in, self.K)), requires_grad=True, name="theta")
        self.slope = None
        if self.family.kind == "piecewise" and self.family.activation == "prelu":
            self.slope = Tensor(self.prelu_init, requires_grad=True, name="prelu_slope")

    # --- parameters -------------------------------------------------------------
    def parameters(self):
        params = [self.theta]
        if self.learn_lambda:
            params.append(self.window.lambda_bar)
        if self.slope is not None:
            params.append(self.slope)
        return params

    def n_params(self):
        return self.d_out * self.d_in * self.K + int(self.learn_lambda) + int(self.slope is not None)

    @property
    def slope_value(self):
        return 0.25 if self.slope is None else float(self.slope.data)

    def init_theta(self, rng):
        """Zero-mean Gaussian coefficients.

        Chebyshev uses variance 4 / (K - 5/4) (variance 1 when K = 1) so the
        expansion has roughly unit energy; other families use the fan-in
        variance 2 / (d_in * K).
        """
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(rng)
        var = init_variance(self.family, self.K, self.d_in)
        self.theta.data = rng.normal(0.0, np.sqrt(var), size=(self.d_out, self.d_in, self.K))

    # --- forward ---------------------------------------------------------------------
    def normalize(self, x, mode="train"):
        if mode == "train":
            mu = ad.mean(x, axis=0, keepdims=True)
            xc = ad.sub(x, mu)
            var = ad.mean(ad.mul(xc, xc), axis=0, keepdims=True)
            if ad.grad_enabled():
                m = self.norm.momentum
                self.norm.running_mean = (1 - m) * self.norm.running_mean + m * mu.data[0]
                self.norm.running_var = (1 - m) * self.norm.running_var + m * var.data[0]
            return ad.mul(xc, ad.power(ad.add(var, BN_EPS), -0.5))
        if mode != "eval":
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        scale = 1.0 / np.sqrt(self.norm.running_var + BN_EPS)
        return ad.mul(ad.sub(x, self.norm.running_mean), scale)

    def weights(self):
        return window_values(self.window, self.K)

    def forward(self, x, mode="train"):
        x = ad.as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeError(f"layer expects [batch, {self.d_in}] input, got {x.shape}")
        z = ad.tanh(self.normalize(x, mode))
        phi = B.expand(self.family, self.K, z, self.slope)
        coef = ad.mul(self.theta, self.weights())
        flat_phi = ad.reshape(phi, (x.shape[0], self.d_in * self.K))
        flat_coef = ad.reshape(coef, (self.d_out, self.d_in * self.K))
        return ad.matmul(flat_phi, ad.transpose(flat_coef))

    __call__ = forward

    # --- resizing -----------------------------------------------------------------
    def resize(self, new_K, scheme="pinv", rng=None, lazy_sigma=0.0):
        """Change the basis count in place.

        Returns the matrix M (new_K x old_K) with theta_new = theta_old @ M.T
        along the basis axis for the pinv and linear schemes, or ``None`` for
        lazy (shared entries kept, new ones from N(0, lazy_sigma^2)).

        pinv and linear act on the windowed coefficients theta * w and divide
        the result by the new window.
        """
        if new_K < 1:
            raise ValueError("basis count must be >= 1")
        if scheme not in interp.SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        if scheme == "linear" and self.family.kind != "piecewise":
            raise UnsupportedError("linear interpolation applies to piecewise-activation bases only")
        old_K = self.K
        if new_K == old_K:
            return np.eye(old_K) if scheme != "lazy" else None
        if scheme == "lazy":
            prob = interp.RemapProblem(self.family, self.theta.data, new_K)
            self.theta.data = interp.lazy_remap(prob, lazy_sigma, rng or np.random.default_rng(0))
            self.K = new_K
            return None
        w_old = window_values(self.window, old_K).data
        w_new = window_values(self.window, new_K).data
        if scheme == "pinv":
            T = interp.pinv_transfer(self.family, old_K, new_K, self.slope_value)
        else:
            T = interp.linear_transfer(old_K, new_K)
        M = (T * w_old[None, :]) / w_new[:, None]
        self.theta.data = self.theta.data @ M.T
        self.K = new_K
        return M

    # --- (de)serialisation ---------------------------------------------------------------
    def state(self):
        return {
            "d_in": self.d_in,
            "d_out": self.d_out,
            "family": str(self.family),
            "side": self.window.side,
            "beta": self.window.beta,
            "gamma": self.window.gamma,
            "lambda_bar": self.window.lambda_value,
            "learn_lambda": self.learn_lambda,
            "K": self.K,
            "theta": self.theta.data.tolist(),
            "slope": None if self.slope is None else float(self.slope.data),
            "running_mean": self.norm.running_mean.tolist(),
            "running_var": self.norm.running_var.tolist(),
            "momentum": self.norm.momentum,
        }

    @classmethod
    def from_state(cls, s):
        window = WindowParams(Tensor(s["lambda_bar"]), s["beta"], s["gamma"], s["side"])
        layer = cls(
            s["d_in"], s["d_out"], B.BasisFamily.parse(s["family"]), window,
            learn_lambda=s["learn_lambda"], K=s["K"],
            norm=NormState(np.array(s["running_mean"], dtype=float),
                           np.array(s["running_var"], dtype=float), s["momentum"]),
        )
        layer.theta.data = np.array(s["theta"], dtype=float).reshape(s["d_out"], s["d_in"], s["K"])
        if layer.slope is not None and s.get("slope") is not None:
            layer.slope.data = np.array(s["slope"], dtype=float)
        return layer


def init_variance(family, K, d_in):
    if family.kind == "chebyshev":
        return 1.0 if K < 2 else 4.0 / (K - 1.25)
    return 2.0 / (d_in * K)
