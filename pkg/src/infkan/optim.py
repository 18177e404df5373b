"""AdamW with decoupled weight decay, plus state remapping for resized tensors."""

from __future__ import annotations

import numpy as np


class AdamW:
    """Adam with weight decay applied directly to the parameters.

    ``params`` is a list of Tensors; ``no_decay`` lists the ones exempt from
    weight decay (matched by identity).
    """

    def __init__(self, params, lr=1e-2, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=1e-5, no_decay=()):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self._no_decay = {id(p) for p in no_decay}
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def clip_grad_norm(self, max_norm):
        total = np.sqrt(sum(float(np.sum(p.grad ** 2)) for p in self.params if p.grad is not None))
        if max_norm and total > max_norm:
            factor = max_norm / (total + 1e-12)
            for p in self.params:
                if p.grad is not None:
                    p.grad = p.grad * factor
        return total

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            if self.weight_decay and id(p) not in self._no_decay:
                p.data = p.data * (1 - self.lr * self.weight_decay)
            step = self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            p.data = np.asarray(p.data - step)

    def _index(self, param):
        for i, p in enumerate(self.params):
            if p is param:
                return i
        raise KeyError("parameter is not managed by this optimizer")

    def remap(self, param, M, new_K):
        """Carry moment estimates of ``param`` across a resize of its last axis.

        With a transfer matrix M the first moment maps linearly and the second
        through M**2 (variance of a linear combination of independent entries);
        without one (lazy resize) shared entries are kept and new ones start at 0.
        """
        i = self._index(param)
        for store, power in ((self.m, 1), (self.v, 2)):
            arr = store[i]
            if M is not None:
                store[i] = arr @ (M ** power).T
            elif new_K <= arr.shape[-1]:
                store[i] = arr[..., :new_K].copy()
            else:
                pad = np.zeros(arr.shape[:-1] + (new_K - arr.shape[-1],))
                store[i] = np.concatenate([arr, pad], axis=-1)

    def state(self):
        return {
            "lr": self.lr,
            "betas": [self.beta1, self.beta2],
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "t": self.t,
            "m": [a.tolist() for a in self.m],
            "v": [a.tolist() for a in self.v],
        }

    def load_state(self, s):
        self.lr = s["lr"]
        self.beta1, self.beta2 = s["betas"]
        self.eps = s["eps"]
        self.weight_decay = s["weight_decay"]
        self.t = s["t"]
        self.m = [np.array(a, dtype=float).reshape(p.data.shape) for a, p in zip(s["m"], self.params)]
        self.v = [np.array(a, dtype=float).reshape(p.data.shape) for a, p in zip(s["v"], self.params)]
