"""Risk decomposition of the closed-form Linear model and forecast metrics.

All errors are means over the ``N * H * C`` target entries so CD and CI
values are on the same scale:

* train error  ``||A_tr W_tr - B_tr||^2 / n``
* test error   ``||A_te W_te - B_te||^2 / n`` (best achievable on test)
* gen error    ``||A_te W_tr - B_te||^2 / n``
* W diff       ``||A_te (W_tr - W_te)||^2 / n``

At an exact test minimizer the test residual is orthogonal to the column
space of ``A_te``, hence ``gen = test + W diff``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .series import DesignMatrices, WindowedDataset
from .solver import COND_LIMIT, SolveConfig, ols_cd, ols_ci


@dataclass(frozen=True)
class RiskReport:
    strategy: str
    train_error: float
    test_error: float
    gen_error: float
    w_diff: float
    w_diff_mahalanobis: float
    pythagorean_residual: float
    cond_train: float
    cond_test: float
    dataset: str = ""
    lookback: int = 0
    horizon: int = 0

    @property
    def well_conditioned(self) -> bool:
        """Whether the test solve is an unambiguous exact minimizer."""
        return self.cond_test < COND_LIMIT

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "L": self.lookback,
            "H": self.horizon,
            "strategy": self.strategy,
            "train_error": self.train_error,
            "test_error": self.test_error,
            "gen_error": self.gen_error,
            "w_diff": self.w_diff,
            "pythagorean_residual": self.pythagorean_residual,
            "cond_train": self.cond_train,
            "cond_test": self.cond_test,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def w_diff_mahalanobis(A_te: np.ndarray, delta: np.ndarray) -> float:
    """``tr(delta^T Sigma delta)`` with the unnormalized covariance ``A_te^T A_te``."""
    sigma = A_te.T @ A_te
    return float(np.trace(delta.T @ sigma @ delta))


def risk_decompose(
    train: DesignMatrices,
    test: DesignMatrices,
    strategy: str,
    cfg: SolveConfig = SolveConfig(),
    dataset: str = "",
) -> RiskReport:
    if (train.lookback, train.horizon, train.n_channels) != (test.lookback, test.horizon, test.n_channels):
        raise ValueError("train and test designs disagree on (L, H, C)")
    solve = {"cd": ols_cd, "ci": ols_ci}[strategy]
    w_tr = solve(train, cfg)
    w_te = solve(test, cfg)
    A_tr, B_tr = train.for_strategy(strategy)
    A_te, B_te = test.for_strategy(strategy)
    n_tr, n_te = B_tr.size, B_te.size

    train_err = float(np.sum((A_tr @ w_tr.W - B_tr) ** 2)) / n_tr
    test_err = float(np.sum((A_te @ w_te.W - B_te) ** 2)) / n_te
    gen_err = float(np.sum((A_te @ w_tr.W - B_te) ** 2)) / n_te
    delta = w_tr.W - w_te.W
    w_diff = float(np.sum((A_te @ delta) ** 2)) / n_te
    w_mah = w_diff_mahalanobis(A_te, delta) / n_te
    resid = abs(gen_err - (w_diff + test_err)) / max(gen_err, 1e-300)
    return RiskReport(
        strategy, train_err, test_err, gen_err, w_diff, w_mah, resid,
        w_tr.condition_number, w_te.condition_number, dataset,
        train.lookback, train.horizon,
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def mse(pred, target) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty prediction set")
    return float(np.mean((pred - target) ** 2))


def mae(pred, target) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty prediction set")
    return float(np.mean(np.abs(pred - target)))


METRICS = {"mse": mse, "mae": mae}


def evaluate(model, dataset: WindowedDataset, metric: str = "mse") -> float:
    """Score a fitted model (anything with ``predict``) or coefficients."""
    if dataset.n_samples == 0:
        raise ValueError("empty dataset")
    if hasattr(model, "predict"):
        pred = model.predict(dataset.X)
    else:
        from .solver import predict

        pred = predict(model, dataset.X)
    return METRICS[metric.lower()](pred, dataset.Y)


def persistence_forecast(dataset: WindowedDataset) -> np.ndarray:
    """Repeat each channel's last observed value across the horizon."""
    return np.repeat(dataset.last_values[:, None, :], dataset.horizon, axis=1)


def persistence_baseline(dataset: WindowedDataset):
    pred = persistence_forecast(dataset)
    return pred, {"mse": mse(pred, dataset.Y), "mae": mae(pred, dataset.Y)}
