import numpy as np


def loss(kind, pred, target):
    """Mean L2 (squared) or L1 (absolute) error and its gradient w.r.t. ``pred``.

    The L1 subgradient is 0 where prediction and target tie.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    n = diff.size
    if kind == "l2":
        return float(np.mean(diff**2)), 2.0 * diff / n
    if kind == "l1":
        return float(np.mean(np.abs(diff))), np.sign(diff) / n
    raise ValueError(f"unknown loss {kind!r}")
