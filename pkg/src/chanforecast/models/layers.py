"""NumPy forecaster networks with hand-written backward passes.

Every network maps a batch ``x`` of shape (batch, in_features) to
(batch, out_features). Parameters live in a plain dict; names starting with
``b`` are biases.
"""

import math

import numpy as np


def uniform_init(rng, fan_in, shape):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# -- dense ------------------------------------------------------------------


def linear_init(rng, n_in, n_out):
    return {"W": uniform_init(rng, n_in, (n_in, n_out)), "b": uniform_init(rng, n_in, (n_out,))}


def linear_forward(params, x):
    return x @ params["W"] + params["b"]


def linear_backward(params, x, grad_out):
    return {"W": x.T @ grad_out, "b": grad_out.sum(axis=0)}


def linear_input_grad(params, x, grad_out):
    return grad_out @ params["W"].T


# -- low rank ---------------------------------------------------------------


def low_rank_dim(m, n, rate):
    """``floor(min(m, n) / rate)``."""
    if rate < 1:
        raise ValueError(f"rank reduction rate must be >= 1, got {rate}")
    r = min(m, n) // int(rate)
    if r < 1:
        raise ValueError(f"rate {rate} leaves rank 0 for a {m} x {n} layer")
    return r


def low_rank_factorize(m, n, rate, rng=None):
    """Initial factors ``M1`` (m x r) and ``M2`` (r x n) replacing an m x n weight."""
    rng = rng if rng is not None else np.random.default_rng(0)
    r = low_rank_dim(m, n, rate)
    return uniform_init(rng, m, (m, r)), uniform_init(rng, r, (r, n))


def lowrank_init(rng, n_in, n_out, rate):
    M1, M2 = low_rank_factorize(n_in, n_out, rate, rng)
    return {"M1": M1, "M2": M2, "b": uniform_init(rng, n_in, (n_out,))}


def lowrank_forward(params, x):
    return (x @ params["M1"]) @ params["M2"] + params["b"]


def lowrank_backward(params, x, grad_out):
    h = x @ params["M1"]
    grad_h = grad_out @ params["M2"].T
    return {"M1": x.T @ grad_h, "M2": h.T @ grad_out, "b": grad_out.sum(axis=0)}


def lowrank_input_grad(params, x, grad_out):
    return (grad_out @ params["M2"].T) @ params["M1"].T


# -- two-layer MLP ----------------------------------------------------------


def mlp_init(rng, n_in, n_out, hidden):
    if hidden < 1:
        raise ValueError("hidden_units must be >= 1")
    return {
        "W1": uniform_init(rng, n_in, (n_in, hidden)),
        "b1": uniform_init(rng, n_in, (hidden,)),
        "W2": uniform_init(rng, hidden, (hidden, n_out)),
        "b2": uniform_init(rng, hidden, (n_out,)),
    }


def mlp_forward(params, x):
    """``relu(x W1 + b1) W2 + b2``."""
    if x.shape[-1] != params["W1"].shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != {params['W1'].shape[0]}")
    h = np.maximum(x @ params["W1"] + params["b1"], 0.0)
    return h @ params["W2"] + params["b2"]


def mlp_backward(params, x, grad_out):
    pre = x @ params["W1"] + params["b1"]
    h = np.maximum(pre, 0.0)
    grad_h = (grad_out @ params["W2"].T) * (pre > 0)
    return {
        "W1": x.T @ grad_h,
        "b1": grad_h.sum(axis=0),
        "W2": h.T @ grad_out,
        "b2": grad_out.sum(axis=0),
    }


def mlp_input_grad(params, x, grad_out):
    pre = x @ params["W1"] + params["b1"]
    return ((grad_out @ params["W2"].T) * (pre > 0)) @ params["W1"].T


ARCHITECTURES = {
    "linear": (linear_forward, linear_backward),
    "lowrank": (lowrank_forward, lowrank_backward),
    "mlp": (mlp_forward, mlp_backward),
}


def init_params(architecture, rng, n_in, n_out, hidden_units=256, rank_rate=1):
    if architecture == "linear":
        return linear_init(rng, n_in, n_out)
    if architecture == "lowrank":
        return lowrank_init(rng, n_in, n_out, rank_rate)
    if architecture == "mlp":
        return mlp_init(rng, n_in, n_out, hidden_units)
    raise ValueError(f"unknown architecture {architecture!r}")


def effective_weight(architecture, params):
    """Linear map realised by a linear or low-rank network (None for MLP)."""
    if architecture == "linear":
        return params["W"]
    if architecture == "lowrank":
        return params["M1"] @ params["M2"]
    return None
