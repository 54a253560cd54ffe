"""Closed-form Linear (CD) and Linear (CI) forecasters.

Both strategies are ordinary least squares on a different stacking of the same
windows (see :func:`chanforecast.series.stack`):

* CD: ``min ||A_cd W - B_cd||_F``, ``W`` is LC x HC
* CI: ``min ||A_ci W - B_ci||_F``, ``W`` is L x H, shared by every channel

The Yule-Walker routes solve the same normal equations expressed through
correlation blocks.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .acf import CorrelationBlocks, build_blocks_from_windows
from .exceptions import NumericalError, SingularSystemError
from .series import DesignMatrices, WindowedDataset, stack, stack_cd, unstack_cd
from .validation import check_windows

logger = logging.getLogger(__name__)

STRATEGIES = ("cd", "ci")
# above this the Gram system is treated as rank deficient
COND_LIMIT = 1e10
JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class SolveConfig:
    ridge: float = 0.0
    rank_deficiency_policy: str = "minimum_norm"

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")
        if self.rank_deficiency_policy not in ("minimum_norm", "error"):
            raise ValueError(f"unknown rank_deficiency_policy {self.rank_deficiency_policy!r}")


@dataclass(frozen=True)
class SolveInfo:
    method: str
    condition_number: float
    jitter: float = 0.0
    rank: Optional[int] = None


@dataclass(frozen=True, eq=False)
class LinearCoefficients:
    """Solved coefficients. ``W`` rows are inputs in chronological order."""

    strategy: str
    W: np.ndarray
    n_channels: int
    bias: Optional[np.ndarray] = None
    info: Optional[SolveInfo] = field(default=None, compare=False)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.W.ndim != 2:
            raise ValueError("W must be 2-D")
        if self.strategy == "cd" and (
            self.W.shape[0] % self.n_channels or self.W.shape[1] % self.n_channels
        ):
            raise ValueError(f"CD W shape {self.W.shape} not divisible by C={self.n_channels}")
        if not np.all(np.isfinite(self.W)):
            raise NumericalError("non-finite coefficients")
        if self.bias is not None and self.bias.shape != (self.W.shape[1],):
            raise ValueError(f"bias shape {self.bias.shape} does not match W {self.W.shape}")

    @property
    def lookback(self) -> int:
        return self.W.shape[0] // (self.n_channels if self.strategy == "cd" else 1)

    @property
    def horizon(self) -> int:
        return self.W.shape[1] // (self.n_channels if self.strategy == "cd" else 1)

    @property
    def condition_number(self) -> float:
        return self.info.condition_number if self.info else float("nan")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n_channels": self.n_channels,
            "lookback": self.lookback,
            "horizon": self.horizon,
            "W_shape": list(self.W.shape),
            "has_bias": self.bias is not None,
            "condition_number": self.condition_number,
            "method": self.info.method if self.info else None,
        }


def condition_number(gram: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(gram)
    top = ev[-1]
    if top <= 0:
        return float("inf")
    low = ev[0]
    return float("inf") if low <= 0 else float(top / low)


def solve_normal_equations(A: np.ndarray, B: np.ndarray, cfg: SolveConfig = SolveConfig()):
    """Solve ``(A^T A + ridge I) W = A^T B``.

    Well-conditioned systems use a Cholesky factorization, escalating a
    diagonal jitter if the factorization breaks down numerically. Rank
    deficient systems (condition number >= ``COND_LIMIT``) either raise or get
    the minimum-Frobenius-norm least-squares solution from an SVD.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[0] < 1:
        raise ValueError("design has no rows")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row mismatch: A {A.shape} vs B {B.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise NumericalError("non-finite values in design")

    gram = A.T @ A
    if cfg.ridge:
        gram[np.diag_indices_from(gram)] += cfg.ridge
    rhs = A.T @ B
    cond = condition_number(gram)

    if cond < COND_LIMIT:
        scale = float(np.mean(np.diag(gram))) or 1.0
        for jitter in (0.0,) + JITTERS:
            g = gram if jitter == 0.0 else gram + jitter * scale * np.eye(gram.shape[0])
            try:
                factor = scipy.linalg.cho_factor(g, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                continue
            W = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
            if jitter:
                logger.warning("Cholesky needed jitter %.1e (cond %.3g)", jitter, cond)
            return W, SolveInfo("cholesky", cond, jitter * scale)
        logger.warning("Cholesky failed with all jitters; using SVD")

    if cfg.rank_deficiency_policy == "error":
        raise SingularSystemError(
            f"normal equations are singular or ill-conditioned (cond={cond:.3g})",
            condition_number=cond,
        )
    if cfg.ridge:
        # ridge with a huge condition number: augmented least squares keeps the
        # exact ridge minimizer
        k = A.shape[1]
        A_aug = np.vstack([A, np.sqrt(cfg.ridge) * np.eye(k)])
        B_aug = np.vstack([B, np.zeros((k, B.shape[1]))])
        W, _, rank, _ = np.linalg.lstsq(A_aug, B_aug, rcond=None)
    else:
        W, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
    return W, SolveInfo("svd_minimum_norm", cond, 0.0, int(rank))


def _with_intercept(A: np.ndarray) -> np.ndarray:
    return np.hstack([A, np.ones((A.shape[0], 1))])


def _ols(strategy, design: DesignMatrices, cfg: SolveConfig, fit_intercept: bool):
    A, B = design.for_strategy(strategy)
    if fit_intercept:
        W, info = solve_normal_equations(_with_intercept(A), B, cfg)
        return LinearCoefficients(strategy, W[:-1], design.n_channels, W[-1].copy(), info)
    W, info = solve_normal_equations(A, B, cfg)
    return LinearCoefficients(strategy, W, design.n_channels, None, info)


def ols_cd(design: DesignMatrices, cfg: SolveConfig = SolveConfig(), fit_intercept: bool = False):
    """Least-squares Linear (CD): ``W_cd`` of shape LC x HC."""
    return _ols("cd", design, cfg, fit_intercept)


def ols_ci(design: DesignMatrices, cfg: SolveConfig = SolveConfig(), fit_intercept: bool = False):
    """Least-squares Linear (CI): one ``W_ci`` of shape L x H for all channels."""
    return _ols("ci", design, cfg, fit_intercept)


def _solve_spd(R: np.ndarray, Rp: np.ndarray, cfg: SolveConfig):
    """Solve ``R W = Rp`` for symmetric positive (semi)definite ``R``."""
    R = R.copy()
    if cfg.ridge:
        R[np.diag_indices_from(R)] += cfg.ridge
    cond = condition_number(R)
    if cond < COND_LIMIT:
        try:
            factor = scipy.linalg.cho_factor(R, lower=True, check_finite=False)
            return scipy.linalg.cho_solve(factor, Rp, check_finite=False), SolveInfo("cholesky", cond)
        except np.linalg.LinAlgError:
            pass
    if cfg.rank_deficiency_policy == "error":
        raise SingularSystemError(f"correlation system is singular (cond={cond:.3g})", condition_number=cond)
    W, _, rank, _ = np.linalg.lstsq(R, Rp, rcond=None)
    return W, SolveInfo("svd_minimum_norm", cond, 0.0, int(rank))


def yule_walker_cd(blocks: CorrelationBlocks, cfg: SolveConfig = SolveConfig()) -> LinearCoefficients:
    """Solve the assembled block system ``[R] W = [R']`` for the CD coefficients."""
    if not blocks.has_cross:
        raise ValueError("CD Yule-Walker needs cross-channel blocks")
    R, Rp = blocks.assembled()
    W_rev, info = _solve_spd(R, Rp, cfg)
    C, L = blocks.n_channels, blocks.lookback
    # rows are most-recent-first within each channel block; flip to chronological
    W = W_rev.reshape(C, L, -1)[:, ::-1, :].reshape(C * L, -1)
    return LinearCoefficients("cd", np.ascontiguousarray(W), C, None, info)


def yule_walker_ci(blocks: CorrelationBlocks, cfg: SolveConfig = SolveConfig()) -> LinearCoefficients:
    """Solve ``(sum_c R_cc) W = sum_c R'_cc`` for the shared CI coefficients."""
    R, Rp = blocks.summed()
    W_rev, info = _solve_spd(R, Rp, cfg)
    return LinearCoefficients("ci", np.ascontiguousarray(W_rev[::-1]), blocks.n_channels, None, info)


def predict(coeffs: LinearCoefficients, X) -> np.ndarray:
    """Forecast from one window (L x C) or a batch (N x L x C)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected (L, C) or (N, L, C) input, got shape {X.shape}")
    N, L, C = X.shape
    if L != coeffs.lookback:
        raise ValueError(f"window length {L} != lookback {coeffs.lookback}")
    if coeffs.strategy == "cd":
        if C != coeffs.n_channels:
            raise ValueError(f"window has {C} channels, coefficients expect {coeffs.n_channels}")
        out = stack_cd(X) @ coeffs.W
        if coeffs.bias is not None:
            out = out + coeffs.bias
        Y = unstack_cd(out, coeffs.horizon, C)
    else:
        Y = np.einsum("nlc,lh->nhc", X, coeffs.W)
        if coeffs.bias is not None:
            Y = Y + coeffs.bias[None, :, None]
    return Y[0] if single else Y


def training_loss(coeffs: LinearCoefficients, design: DesignMatrices) -> float:
    """Mean squared residual on a stacked design."""
    A, B = design.for_strategy(coeffs.strategy)
    R = A @ coeffs.W - B
    if coeffs.bias is not None:
        R = R + coeffs.bias
    return float(np.mean(R**2))


def normal_equation_residual(coeffs: LinearCoefficients, design: DesignMatrices, cfg: SolveConfig = SolveConfig()) -> float:
    """``||A^T A W - A^T B||_F / ||A^T B||_F`` (ridge included)."""
    A, B = design.for_strategy(coeffs.strategy)
    rhs = A.T @ B
    lhs = A.T @ (A @ coeffs.W) + cfg.ridge * coeffs.W
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------


class LinearForecaster(RegressorMixin, BaseEstimator):
    """Closed-form linear forecaster trained under the CD or CI strategy.

    Parameters
    ----------
    strategy : {"ci", "cd"}
    solver : {"ols", "yule_walker"}
        ``"yule_walker"`` builds correlation blocks from the windowed Gram
        matrices and solves the Yule-Walker system; on variance-equalized data
        it agrees with ``"ols"``.
    ridge : float
        Tikhonov term added to the Gram diagonal.
    fit_intercept : bool
    rank_deficiency_policy : {"minimum_norm", "error"}

    ``fit`` takes windows ``X`` of shape (N, L, C) and targets ``y`` of shape
    (N, H, C); ``predict`` returns (N, H, C).
    """

    def __init__(self, strategy="ci", solver="ols", ridge=0.0, fit_intercept=False,
                 rank_deficiency_policy="minimum_norm"):
        self.strategy = strategy
        self.solver = solver
        self.ridge = ridge
        self.fit_intercept = fit_intercept
        self.rank_deficiency_policy = rank_deficiency_policy

    def fit(self, X, y):
        X, y = check_windows(X, y)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        cfg = SolveConfig(self.ridge, self.rank_deficiency_policy)
        ds = WindowedDataset(X, y)
        if self.solver == "ols":
            solve = ols_cd if self.strategy == "cd" else ols_ci
            self.coef_ = solve(stack(ds), cfg, self.fit_intercept)
        elif self.solver == "yule_walker":
            if self.fit_intercept:
                raise ValueError("yule_walker solver has no intercept")
            blocks = build_blocks_from_windows(ds)
            solve = yule_walker_cd if self.strategy == "cd" else yule_walker_ci
            self.coef_ = solve(blocks, cfg)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        self.n_features_in_ = X.shape[2]
        self.lookback_ = X.shape[1]
        self.horizon_ = y.shape[1]
        self.condition_number_ = self.coef_.condition_number
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_windows(X, lookback=self.lookback_, n_channels=self.n_features_in_)
        return predict(self.coef_, X)

    def score(self, X, y, sample_weight=None):
        """Negative MSE over every sample, horizon step and channel."""
        pred = self.predict(X)
        return -float(np.mean((pred - np.asarray(y)) ** 2))


# ---------------------------------------------------------------------------
# serialization: JSON header + CSV body
# ---------------------------------------------------------------------------


def save_coefficients(coeffs: LinearCoefficients, directory, normalization=None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = coeffs.to_dict()
    if normalization is not None:
        header["normalization"] = {
            "mean": [float(v) for v in normalization.mean],
            "std": [float(v) for v in normalization.std],
        }
    (directory / "coefficients.json").write_text(json.dumps(header, indent=2))
    np.savetxt(directory / "W.csv", coeffs.W, delimiter=",", fmt="%.17g")
    if coeffs.bias is not None:
        np.savetxt(directory / "bias.csv", coeffs.bias[None], delimiter=",", fmt="%.17g")
    return directory


def load_coefficients(directory) -> LinearCoefficients:
    directory = Path(directory)
    header = json.loads((directory / "coefficients.json").read_text())
    W = np.loadtxt(directory / "W.csv", delimiter=",", ndmin=2).reshape(header["W_shape"])
    bias = None
    if header.get("has_bias"):
        bias = np.loadtxt(directory / "bias.csv", delimiter=",", ndmin=1).reshape(-1)
    info = SolveInfo(header.get("method") or "loaded", header.get("condition_number", float("nan")))
    return LinearCoefficients(header["strategy"], W, header["n_channels"], bias, info)
