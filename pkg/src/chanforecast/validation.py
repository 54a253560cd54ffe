"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_windows(X, y=None, lookback=None, n_channels=None):
    """Validate window batches ``X`` (N, L, C) and optional targets (N, H, C).

    2-D inputs are read as a single-channel batch (N, L).
    """
    X = check_array(X, allow_nd=True, dtype=np.float64, ensure_all_finite=True)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3:
        raise ValueError(f"windows must have shape (N, L, C), got {X.shape}")
    if lookback is not None and X.shape[1] != lookback:
        raise ValueError(f"expected look-back {lookback}, got {X.shape[1]}")
    if n_channels is not None and X.shape[2] != n_channels:
        raise ValueError(f"expected {n_channels} channels, got {X.shape[2]}")
    if y is None:
        return X
    y = check_array(y, allow_nd=True, dtype=np.float64, ensure_all_finite=True)
    if y.ndim == 2:
        y = y[:, :, None]
    if y.ndim != 3 or y.shape[0] != X.shape[0] or y.shape[2] != X.shape[2]:
        raise ValueError(f"targets {y.shape} do not match windows {X.shape}")
    return X, y
