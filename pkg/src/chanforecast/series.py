"""Series ingestion, chronological splitting, normalization and windowing.

The windowed representation follows the per-channel reshaping used by the
closed-form analysis: for ``N`` samples with look-back ``L`` and horizon ``H``
each channel ``c`` owns ``A[c]`` (N x L) and ``B[c]`` (N x H) with
``A[c][i, l] == X[i][l, c]`` and ``B[c][i, h] == Y[i][h, c]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DataError,
    NonFiniteValueError,
    NonNumericValueError,
    SegmentTooShortError,
    ZeroVarianceError,
)


@dataclass(frozen=True, eq=False)
class MultivariateSeries:
    """A ``T x C`` real-valued series with channel names.

    Parameters
    ----------
    values : ndarray of shape (T, C)
    channel_names : sequence of str, length C
    granularity : str
        Free-text sampling label such as ``"1hour"``.
    timestamps : ndarray of shape (T,), optional
    """

    values: np.ndarray
    channel_names: tuple = ()
    granularity: str = ""
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError(f"series values must be 2-D, got shape {values.shape}")
        T, C = values.shape
        if T < 1 or C < 1:
            raise DataError(f"series needs T >= 1 and C >= 1, got {values.shape}")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise NonFiniteValueError(
                f"non-finite value at row {r}, column {c}", row=int(r), column=int(c)
            )
        names = tuple(self.channel_names) or tuple(str(i) for i in range(C))
        if len(names) != C:
            raise DataError(f"{len(names)} channel names for {C} channels")
        ts = self.timestamps
        if ts is not None:
            ts = np.asarray(ts)
            if ts.shape != (T,):
                raise DataError(f"timestamps shape {ts.shape} does not match T={T}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "timestamps", ts)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n_steps

    def slice(self, start: int, stop: int) -> "MultivariateSeries":
        ts = None if self.timestamps is None else self.timestamps[start:stop]
        return MultivariateSeries(
            self.values[start:stop], self.channel_names, self.granularity, ts
        )

    def with_values(self, values) -> "MultivariateSeries":
        return MultivariateSeries(
            values, self.channel_names, self.granularity, self.timestamps
        )

    def select(self, channels: Sequence) -> "MultivariateSeries":
        idx = [
            self.channel_names.index(c) if isinstance(c, str) else int(c)
            for c in channels
        ]
        return MultivariateSeries(
            self.values[:, idx],
            tuple(self.channel_names[i] for i in idx),
            self.granularity,
            self.timestamps,
        )

    def to_frame(self, date_column: str = "date") -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=list(self.channel_names))
        ts = self.timestamps if self.timestamps is not None else np.arange(self.n_steps)
        df.insert(0, date_column, ts)
        return df


def _parse_timestamps(raw: pd.Series) -> np.ndarray:
    """Datetimes when every cell is ISO 8601, otherwise the raw strings."""
    parsed = pd.to_datetime(raw, errors="coerce", format="ISO8601")
    if parsed.isna().any():
        return raw.astype(str).to_numpy()
    return parsed.to_numpy()


def load_csv(
    path,
    date_column: Optional[str] = None,
    granularity: str = "",
    forward_fill: bool = False,
) -> MultivariateSeries:
    """Read a dataset CSV: header row, a date column, then channel columns.

    Missing or non-finite cells are rejected unless ``forward_fill`` is set, in
    which case they are replaced by the last valid value of the same channel.
    Cells that are not numbers at all are always rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError(f"empty file: {path}") from None
    if df.shape[0] == 0:
        raise DataError(f"no data rows in {path}")
    if date_column is None:
        date_column = df.columns[0]
    elif date_column not in df.columns:
        raise DataError(f"date column {date_column!r} not in {path}")
    channels = [c for c in df.columns if c != date_column]
    if not channels:
        raise DataError(f"no channel columns in {path}")

    values = np.empty((len(df), len(channels)))
    for j, name in enumerate(channels):
        text = df[name].str.strip()
        try:
            # Python float parsing is correctly rounded, so written floats read back exactly
            col = text.astype(np.float64).to_numpy()
        except ValueError:
            col = pd.to_numeric(text, errors="coerce").to_numpy(dtype=np.float64)
        missing_token = text.str.lower().isin(["", "nan", "na", "null", "inf", "-inf"])
        garbage = np.isnan(col) & ~missing_token.to_numpy()
        if garbage.any():
            r = int(np.argmax(garbage))
            raise NonNumericValueError(
                f"non-numeric cell {df[name].iloc[r]!r} at row {r}, column {name!r}",
                row=r,
                column=name,
            )
        values[:, j] = col

    bad = ~np.isfinite(values)
    if bad.any():
        if not forward_fill:
            r, c = np.argwhere(bad)[0]
            raise NonFiniteValueError(
                f"non-finite value at row {r}, column {channels[c]!r}",
                row=int(r),
                column=channels[c],
            )
        values[bad] = np.nan
        values = pd.DataFrame(values).ffill().to_numpy()
        if np.isnan(values).any():
            r, c = np.argwhere(np.isnan(values))[0]
            raise NonFiniteValueError(
                f"leading missing value cannot be forward-filled "
                f"(row {r}, column {channels[c]!r})",
                row=int(r),
                column=channels[c],
            )

    return MultivariateSeries(
        values, tuple(channels), granularity, _parse_timestamps(df[date_column])
    )


def write_csv(series: MultivariateSeries, path, date_column: str = "date") -> Path:
    """Write a series in the same layout ``load_csv`` reads (lossless floats)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = series.to_frame(date_column)
    if np.issubdtype(df[date_column].dtype, np.datetime64):
        df[date_column] = df[date_column].dt.strftime("%Y-%m-%d %H:%M:%S")
    df.to_csv(path, index=False, float_format="%.17g")
    return path


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/val/test split.

    Fraction mode floors the train and val lengths and gives the remainder to
    test. ``lengths`` switches to fixed segment lengths (used by the ETT
    12/4/4-month preset); rows past the last segment are dropped.
    """

    train_fraction: float = 0.7
    val_fraction: float = 0.1
    test_fraction: float = 0.2
    lengths: Optional[tuple] = None
    boundary_mode: str = "contiguous-chronological"

    def __post_init__(self):
        if self.lengths is not None:
            if len(self.lengths) != 3 or min(self.lengths) < 1:
                raise ValueError(f"lengths must be three positive ints, got {self.lengths}")
            return
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if not all(0.0 < f < 1.0 for f in fr):
            raise ValueError(f"split fractions must lie in (0, 1), got {fr}")
        if not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise ValueError(f"split fractions must sum to 1, got {sum(fr)}")

    @classmethod
    def ett(cls, steps_per_hour: int = 1) -> "SplitSpec":
        """12/4/4 months of 30 days, the convention of the ETT benchmarks."""
        month = 30 * 24 * steps_per_hour
        return cls(lengths=(12 * month, 4 * month, 4 * month))

    def segment_lengths(self, n_steps: int) -> tuple:
        if self.lengths is not None:
            if sum(self.lengths) > n_steps:
                raise SegmentTooShortError(
                    f"preset needs {sum(self.lengths)} steps, series has {n_steps}"
                )
            return tuple(int(x) for x in self.lengths)
        n_train = int(math.floor(n_steps * self.train_fraction))
        n_val = int(math.floor(n_steps * self.val_fraction))
        return n_train, n_val, n_steps - n_train - n_val


SPLIT_PRESETS = {
    "default": SplitSpec(),
    "ett-hour": SplitSpec.ett(1),
    "ett-minute": SplitSpec.ett(4),
}


def split(
    series: MultivariateSeries,
    spec: Optional[SplitSpec] = None,
    lookback: Optional[int] = None,
    horizon: Optional[int] = None,
    overlap: bool = False,
):
    """Split chronologically into ``(train, val, test)``.

    With ``overlap=True`` the val and test segments are extended backwards by
    ``lookback`` rows so their first forecast target is the first row of the
    segment (the usual benchmark loader convention). When both ``lookback`` and
    ``horizon`` are given every returned segment must hold at least one window.
    """
    spec = spec or SplitSpec()
    n_train, n_val, n_test = spec.segment_lengths(series.n_steps)
    bounds = [(0, n_train), (n_train, n_train + n_val), (n_train + n_val, n_train + n_val + n_test)]
    if overlap:
        if lookback is None:
            raise ValueError("overlap=True needs a lookback")
        bounds = [bounds[0]] + [(max(0, a - lookback), b) for a, b in bounds[1:]]
    if lookback is not None and horizon is not None:
        need = lookback + horizon
        for name, (a, b) in zip(("train", "val", "test"), bounds):
            if b - a < need:
                raise SegmentTooShortError(
                    f"{name} segment has {b - a} steps, needs >= L + H = {need}"
                )
    return tuple(series.slice(a, b) for a, b in bounds)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray


class SeriesScaler(StandardScaler):
    """Per-channel z-score fitted on the train split.

    Same as :class:`sklearn.preprocessing.StandardScaler` (population std) but a
    zero-variance channel is an error instead of being silently left unscaled,
    and :class:`MultivariateSeries` inputs are accepted and returned.
    """

    def fit(self, X, y=None, sample_weight=None):
        values = X.values if isinstance(X, MultivariateSeries) else X
        super().fit(values, y, sample_weight)
        zero = np.flatnonzero(self.var_ <= 0.0)
        if zero.size:
            names = X.channel_names if isinstance(X, MultivariateSeries) else None
            which = [names[i] for i in zero] if names else zero.tolist()
            raise ZeroVarianceError(f"zero-variance channel(s) in train split: {which}")
        return self

    def transform(self, X, copy=None):
        if isinstance(X, MultivariateSeries):
            return X.with_values(super().transform(X.values, copy=True))
        return super().transform(X, copy=copy)

    def inverse_transform(self, X, copy=None):
        if isinstance(X, MultivariateSeries):
            return X.with_values(super().inverse_transform(X.values, copy=True))
        return super().inverse_transform(X, copy=copy)

    @property
    def stats(self) -> NormalizationStats:
        check_is_fitted(self)
        return NormalizationStats(self.mean_.copy(), self.scale_.copy())

    @classmethod
    def from_stats(cls, mean, std) -> "SeriesScaler":
        scaler = cls()
        scaler.mean_ = np.asarray(mean, dtype=np.float64)
        scaler.scale_ = np.asarray(std, dtype=np.float64)
        scaler.var_ = scaler.scale_**2
        scaler.n_features_in_ = scaler.mean_.shape[0]
        scaler.n_samples_seen_ = 0
        return scaler


def fit_normalizer(train: MultivariateSeries) -> SeriesScaler:
    return SeriesScaler().fit(train)


# ---------------------------------------------------------------------------
# windows and stacked designs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    """``N`` paired windows ``X[i]`` (L x C) and ``Y[i]`` (H x C)."""

    X: np.ndarray
    Y: np.ndarray
    channel_names: tuple = field(default=())

    def __post_init__(self):
        if self.X.ndim != 3 or self.Y.ndim != 3:
            raise ValueError("X and Y must be 3-D (N, steps, C)")
        if self.X.shape[0] != self.Y.shape[0] or self.X.shape[2] != self.Y.shape[2]:
            raise ValueError(f"X {self.X.shape} and Y {self.Y.shape} disagree")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def lookback(self) -> int:
        return self.X.shape[1]

    @property
    def horizon(self) -> int:
        return self.Y.shape[1]

    @property
    def n_channels(self) -> int:
        return self.X.shape[2]

    @property
    def A(self) -> np.ndarray:
        """Per-channel inputs, shape (C, N, L)."""
        return self.X.transpose(2, 0, 1)

    @property
    def B(self) -> np.ndarray:
        """Per-channel targets, shape (C, N, H)."""
        return self.Y.transpose(2, 0, 1)

    @property
    def last_values(self) -> np.ndarray:
        """Last observed value of each channel per window, shape (N, C)."""
        return self.X[:, -1, :]


def make_windows(series, lookback: int, horizon: int, stride: int = 1) -> WindowedDataset:
    """Slide a window over the series; sample ``i`` starts at row ``i * stride``."""
    if lookback < 1 or horizon < 1:
        raise ValueError(f"lookback and horizon must be >= 1, got {lookback}, {horizon}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    names = ()
    if isinstance(series, MultivariateSeries):
        names = series.channel_names
        values = series.values
    else:
        values = np.asarray(series, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
    T = values.shape[0]
    span = lookback + horizon
    if T < span:
        raise SegmentTooShortError(f"series of length {T} is shorter than L + H = {span}")
    # (T - span + 1, C, span) view; copy so the dataset owns contiguous memory
    win = np.lib.stride_tricks.sliding_window_view(values, span, axis=0)[::stride]
    win = np.ascontiguousarray(win.transpose(0, 2, 1))
    return WindowedDataset(win[:, :lookback, :], win[:, lookback:, :], names)


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """Stacked least-squares designs.

    ``A_cd`` (N x LC) places the channel blocks side by side, ``A_ci`` (NC x L)
    stacks them top to bottom; ``B`` likewise with H.
    """

    A_cd: np.ndarray
    B_cd: np.ndarray
    A_ci: np.ndarray
    B_ci: np.ndarray
    lookback: int
    horizon: int
    n_channels: int

    @property
    def n_samples(self) -> int:
        return self.A_cd.shape[0]

    def for_strategy(self, strategy: str):
        strategy = strategy.lower()
        if strategy == "cd":
            return self.A_cd, self.B_cd
        if strategy == "ci":
            return self.A_ci, self.B_ci
        raise ValueError(f"unknown strategy {strategy!r}")


def stack_cd(W: np.ndarray) -> np.ndarray:
    """(N, steps, C) -> (N, C*steps), channel blocks side by side."""
    N, S, C = W.shape
    return W.transpose(0, 2, 1).reshape(N, C * S)


def unstack_cd(M: np.ndarray, steps: int, n_channels: int) -> np.ndarray:
    N = M.shape[0]
    return M.reshape(N, n_channels, steps).transpose(0, 2, 1)


def stack_ci(W: np.ndarray) -> np.ndarray:
    """(N, steps, C) -> (C*N, steps), channel blocks top to bottom."""
    N, S, C = W.shape
    return W.transpose(2, 0, 1).reshape(C * N, S)


def unstack_ci(M: np.ndarray, n_channels: int) -> np.ndarray:
    CN, S = M.shape
    return M.reshape(n_channels, CN // n_channels, S).transpose(1, 2, 0)


def stack(dataset: WindowedDataset) -> DesignMatrices:
    return DesignMatrices(
        A_cd=stack_cd(dataset.X),
        B_cd=stack_cd(dataset.Y),
        A_ci=stack_ci(dataset.X),
        B_ci=stack_ci(dataset.Y),
        lookback=dataset.lookback,
        horizon=dataset.horizon,
        n_channels=dataset.n_channels,
    )


def unstack(design: DesignMatrices, channel_names: tuple = ()) -> WindowedDataset:
    C = design.n_channels
    return WindowedDataset(
        unstack_cd(design.A_cd, design.lookback, C),
        unstack_cd(design.B_cd, design.horizon, C),
        channel_names,
    )
