"""Auto/cross-correlation estimation, Yule-Walker correlation blocks and
train/test ACF drift.

Covariances use the ``1/(T - tau)`` normalization around the segment mean,

    gamma(tau) = 1/(T - tau) * sum_{t=1}^{T-tau} (x_t - xbar)(x_{t+tau} - xbar),
    rho(tau)   = gamma(tau) / gamma(0).

Cross-correlation is ``rho_{a,b}(tau) = corr(x_a(t), x_b(t + tau))`` so that
``rho_{a,b}(tau) == rho_{b,a}(-tau)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import fft as sp_fft

from .exceptions import InsufficientLagsError, SegmentTooShortError, ZeroVarianceError
from .series import MultivariateSeries, WindowedDataset

_VAR_EPS = 1e-300


def _lagged_products(a: np.ndarray, b: np.ndarray, max_lag: int) -> np.ndarray:
    """``S[k] = sum_t a[t] * b[t + k]`` for k = 0..max_lag via zero-padded FFT."""
    T = a.shape[0]
    n = sp_fft.next_fast_len(T + max_lag + 1)
    fa = sp_fft.rfft(a, n)
    fb = sp_fft.rfft(b, n)
    full = sp_fft.irfft(np.conj(fa) * fb, n)
    return full[: max_lag + 1]


def _centered(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    d = x - x.mean()
    if np.dot(d, d) <= _VAR_EPS * max(1.0, np.dot(x, x)):
        raise ZeroVarianceError(f"{name} has zero variance")
    return d


def estimate_acf(x, max_lag: int) -> np.ndarray:
    """Autocorrelation ``rho(0..max_lag)`` of a 1-D series."""
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[0]
    if max_lag < 0 or T < max_lag + 2:
        raise InsufficientLagsError(f"max_lag={max_lag} needs T >= {max_lag + 2}, got {T}")
    d = _centered(x)
    sums = _lagged_products(d, d, max_lag)
    gamma = sums / (T - np.arange(max_lag + 1))
    rho = gamma / gamma[0]
    rho[0] = 1.0
    return rho


def estimate_cross_corr(x_a, x_b, max_lag: int, min_lag: Optional[int] = None):
    """Cross-correlation ``rho_{a,b}(tau)`` for ``tau`` in ``min_lag..max_lag``.

    Returns
    -------
    lags : ndarray of int
    rho : ndarray
    """
    da = _centered(x_a, "x_a")
    db = _centered(x_b, "x_b")
    if da.shape != db.shape:
        raise ValueError(f"length mismatch: {da.shape[0]} vs {db.shape[0]}")
    T = da.shape[0]
    if min_lag is None:
        min_lag = -max_lag
    if min_lag > max_lag:
        raise ValueError("min_lag > max_lag")
    reach = max(abs(min_lag), abs(max_lag))
    if T < reach + 2:
        raise InsufficientLagsError(f"lags up to {reach} need T >= {reach + 2}, got {T}")
    scale = np.sqrt((np.dot(da, da) / T) * (np.dot(db, db) / T))
    lags = np.arange(min_lag, max_lag + 1)
    out = np.empty(lags.shape[0])
    pos = lags >= 0
    if pos.any():
        s = _lagged_products(da, db, int(lags[pos].max()))
        k = lags[pos]
        out[pos] = s[k] / (T - k)
    if (~pos).any():
        s = _lagged_products(db, da, int(-lags[~pos].min()))
        k = -lags[~pos]
        out[~pos] = s[k] / (T - k)
    return lags, out / scale


# ---------------------------------------------------------------------------
# profiles and Yule-Walker blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AcfProfile:
    """Per-channel ACF curves, ``values[c, tau]`` for tau = 0..max_lag."""

    values: np.ndarray
    channel_names: tuple = ()

    @property
    def max_lag(self) -> int:
        return self.values.shape[1] - 1

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]


def acf_profile(series, max_lag: int) -> AcfProfile:
    values = series.values if isinstance(series, MultivariateSeries) else np.asarray(series)
    if values.ndim == 1:
        values = values[:, None]
    names = series.channel_names if isinstance(series, MultivariateSeries) else ()
    curves = np.stack([estimate_acf(values[:, c], max_lag) for c in range(values.shape[1])])
    return AcfProfile(curves, names)


@dataclass(frozen=True, eq=False)
class CorrelationBlocks:
    """Yule-Walker correlation blocks for every channel pair.

    ``R[a, b]`` is L x L with ``R[a, b][i, j] = rho_{a,b}(i - j)`` and
    ``Rprime[a, b]`` is L x H with ``Rprime[a, b][i, j] = rho_{a,b}(i + j + 1)``.
    Row ``i`` of both refers to the input ``i + 1`` steps before the forecast
    origin (most recent first); column ``j`` of ``Rprime`` to horizon step
    ``j + 1``. Coefficients solved from these blocks are therefore indexed most
    recent first and are flipped back by the solver.
    """

    R: np.ndarray
    Rprime: np.ndarray
    has_cross: bool = True
    source: str = "acf"
    channel_names: tuple = field(default=())

    @property
    def lookback(self) -> int:
        return self.R.shape[2]

    @property
    def horizon(self) -> int:
        return self.Rprime.shape[3]

    @property
    def n_channels(self) -> int:
        return self.R.shape[0]

    def assembled(self):
        """Full ``(LC x LC, LC x HC)`` CD system."""
        C, _, L, _ = self.R.shape
        H = self.horizon
        R = self.R.transpose(0, 2, 1, 3).reshape(C * L, C * L)
        Rp = self.Rprime.transpose(0, 2, 1, 3).reshape(C * L, C * H)
        return R, Rp

    def summed(self):
        """Channel-summed ``(L x L, L x H)`` CI system."""
        idx = np.arange(self.n_channels)
        return self.R[idx, idx].sum(axis=0), self.Rprime[idx, idx].sum(axis=0)


def _blocks_from_lag_function(rho, L: int, H: int):
    """``rho(tau)`` given on tau = -(L-1)..(H+L-1) as an array offset by L-1."""
    i = np.arange(L)[:, None]
    j_l = np.arange(L)[None, :]
    j_h = np.arange(H)[None, :]
    off = L - 1
    return rho[..., i - j_l + off], rho[..., i + j_h + 1 + off]


def build_blocks(source, lookback: int, horizon: int, cross: bool = True) -> CorrelationBlocks:
    """Correlation blocks from a raw segment or from per-channel ACF profiles.

    Parameters
    ----------
    source : MultivariateSeries, ndarray (T, C) or AcfProfile
        A profile only carries auto-correlations, so its cross blocks are left
        at zero and flagged ``has_cross=False``.
    cross : bool
        Skip cross-channel estimation for raw segments when False.
    """
    L, H = lookback, horizon
    need = H + L - 1
    names = getattr(source, "channel_names", ())
    if isinstance(source, AcfProfile):
        if source.max_lag < need:
            raise InsufficientLagsError(f"profile has lags up to {source.max_lag}, needs {need}")
        C = source.n_channels
        rho = np.zeros((C, C, L - 1 + need + 1))
        for c in range(C):
            curve = source.values[c, : need + 1]
            rho[c, c] = np.concatenate([curve[1:L][::-1], curve])
        R, Rp = _blocks_from_lag_function(rho, L, H)
        return CorrelationBlocks(R, Rp, has_cross=False, source="acf", channel_names=names)

    values = source.values if isinstance(source, MultivariateSeries) else np.asarray(source, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    T, C = values.shape
    if T < need + 2:
        raise InsufficientLagsError(f"segment of length {T} too short for lags up to {need}")
    rho = np.zeros((C, C, L - 1 + need + 1))
    for a in range(C):
        for b in range(C):
            if a != b and not cross:
                continue
            if a == b:
                curve = estimate_acf(values[:, a], need)
                rho[a, a] = np.concatenate([curve[1:L][::-1], curve])
            else:
                _, rho[a, b] = estimate_cross_corr(values[:, a], values[:, b], need, -(L - 1))
    R, Rp = _blocks_from_lag_function(rho, L, H)
    return CorrelationBlocks(R, Rp, has_cross=cross or C == 1, source="acf", channel_names=names)


def build_blocks_from_windows(
    dataset: WindowedDataset, channel_scale=None
) -> CorrelationBlocks:
    """Blocks from the empirical Gram matrices of the windowed design.

    ``R[a, b] = Ar[a].T @ Ar[b] / (N * s_a * s_b)`` and
    ``Rprime[a, b] = Ar[a].T @ B[b] / (N * s_a * s_b)`` where ``Ar`` is the
    input block with its columns reversed (most recent first). With equal
    channel scales these are the normal equations of the least-squares
    objectives divided by a common variance, so the Yule-Walker solutions
    coincide with OLS. ``channel_scale`` defaults to all ones, i.e. the data is
    assumed variance-equalized already.
    """
    X = dataset.X[:, ::-1, :]
    Y = dataset.Y
    N, L, C = X.shape
    s = np.ones(C) if channel_scale is None else np.asarray(channel_scale, dtype=np.float64)
    Xs = X / s
    Ys = Y / s
    R = np.einsum("nia,njb->abij", Xs, Xs) / N
    Rp = np.einsum("nia,njb->abij", Xs, Ys) / N
    return CorrelationBlocks(R, Rp, has_cross=True, source="gram", channel_names=dataset.channel_names)


# ---------------------------------------------------------------------------
# drift between train and test ACFs
# ---------------------------------------------------------------------------


def default_max_lag(train_len: int, test_len: int, cap: int = 1000) -> int:
    return int(min(train_len // 4, test_len // 4, cap))


@dataclass(frozen=True, eq=False)
class DriftReport:
    channel_names: tuple
    diff: np.ndarray
    sum_diff: float
    max_lag: int
    train_acf: np.ndarray
    test_acf: np.ndarray

    @property
    def ranking(self) -> list:
        """Channel indices by descending ACF difference (stable on ties)."""
        return [int(i) for i in np.argsort(-self.diff, kind="stable")]

    @property
    def fraction_above_sum(self) -> float:
        """Share of channels whose difference exceeds the sum diff."""
        return float(np.mean(self.diff > self.sum_diff))

    def to_dict(self) -> dict:
        return {
            "channels": [
                {"name": self.channel_names[i], "diff": float(self.diff[i])} for i in self.ranking
            ],
            "sum_diff": float(self.sum_diff),
            "max_lag": int(self.max_lag),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    def write_curves_csv(self, path) -> Path:
        """Long-format ACF curves: lag, channel, train_acf, test_acf."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "channel", "train_acf", "test_acf"])
            for c, name in enumerate(self.channel_names):
                for lag in range(self.max_lag + 1):
                    w.writerow([lag, name, repr(float(self.train_acf[c, lag])), repr(float(self.test_acf[c, lag]))])
            for lag in range(self.max_lag + 1):
                w.writerow([lag, "__mean__", repr(float(self.train_acf[:, lag].mean())), repr(float(self.test_acf[:, lag].mean()))])
        return path


def drift_report(train, test, max_lag: Optional[int] = None) -> DriftReport:
    """Per-channel squared ACF gap between train and test, and the gap of the
    channel-mean ACF curves (the sum diff)."""
    tr = train.values if isinstance(train, MultivariateSeries) else np.asarray(train, dtype=np.float64)
    te = test.values if isinstance(test, MultivariateSeries) else np.asarray(test, dtype=np.float64)
    if tr.ndim == 1:
        tr, te = tr[:, None], te[:, None]
    if tr.shape[1] != te.shape[1]:
        raise ValueError("train and test have different channel counts")
    if max_lag is None:
        max_lag = default_max_lag(tr.shape[0], te.shape[0])
    for name, seg in (("train", tr), ("test", te)):
        if seg.shape[0] < max_lag + 2:
            raise SegmentTooShortError(f"{name} segment of {seg.shape[0]} steps < max_lag + 2 = {max_lag + 2}")
    names = getattr(train, "channel_names", ()) or tuple(str(i) for i in range(tr.shape[1]))
    rho_tr = acf_profile(tr, max_lag).values
    rho_te = acf_profile(te, max_lag).values
    diff = ((rho_tr - rho_te) ** 2).sum(axis=1)
    sum_diff = float(((rho_tr.mean(axis=0) - rho_te.mean(axis=0)) ** 2).sum())
    return DriftReport(tuple(names), diff, sum_diff, int(max_lag), rho_tr, rho_te)
