import numpy as np


class Adam:
    """Adam with decoupled weight decay.

    The decay step is taken in implicit form, ``w <- w / (1 + lr * decay)``,
    which matches ``w <- w (1 - lr * decay)`` to first order and stays stable
    for arbitrarily large decay coefficients.
    """

    def __init__(self, params, lr, weight_decay=0.0, decay_bias=False,
                 betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_bias = decay_bias
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def _decays(self, name):
        return self.weight_decay > 0 and (self.decay_bias or not name.startswith("b"))

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self._decays(k):
                params[k] /= 1.0 + self.lr * self.weight_decay


class GradientDescent:
    """Plain full-step gradient descent with the same implicit decay."""

    def __init__(self, params, lr, weight_decay=0.0, decay_bias=False):
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_bias = decay_bias

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.lr * g
            if self.weight_decay > 0 and (self.decay_bias or not k.startswith("b")):
                params[k] /= 1.0 + self.lr * self.weight_decay


OPTIMIZERS = {"adam": Adam, "gd": GradientDescent}
