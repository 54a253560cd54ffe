"""Experiment configuration and the benchmark dataset registry.

Config files are flat ``key = value`` text (an optional ``[experiment]``
header is accepted). Lists are comma separated. Every key matches an
``ExperimentConfig`` field; see ``SCHEMA`` for types and defaults.

Example::

    dataset = ETTh2
    lookback = 96
    horizons = 48, 96
    strategies = cd, ci
    model = linear
    mode = train
    sweep = lambda
    lambda_grid = 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from ..exceptions import ConfigError, DatasetNotFoundError
from ..series import SPLIT_PRESETS, SplitSpec

DATA_ENV = "CHANFORECAST_DATA"


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    filename: str
    n_channels: int
    n_steps: int
    granularity: str
    split: str = "default"

    @property
    def lookback(self) -> int:
        return 36 if self.name == "ILI" else 96

    @property
    def horizons(self) -> tuple:
        return (24, 36) if self.name == "ILI" else (48, 96)


DATASETS = {
    d.name: d
    for d in (
        DatasetInfo("ETTh1", "ETTh1.csv", 7, 17420, "1hour", "ett-hour"),
        DatasetInfo("ETTh2", "ETTh2.csv", 7, 17420, "1hour", "ett-hour"),
        DatasetInfo("ETTm1", "ETTm1.csv", 7, 69680, "15min", "ett-minute"),
        DatasetInfo("ETTm2", "ETTm2.csv", 7, 69680, "15min", "ett-minute"),
        DatasetInfo("Exchange", "exchange_rate.csv", 8, 7588, "1day"),
        DatasetInfo("ILI", "national_illness.csv", 7, 966, "1week"),
        DatasetInfo("Weather", "weather.csv", 21, 52696, "10min"),
        DatasetInfo("Electricity", "electricity.csv", 321, 26304, "1hour"),
        DatasetInfo("Traffic", "traffic.csv", 862, 17544, "1hour"),
    )
}


def data_dir(override=None) -> Path:
    return Path(override or os.environ.get(DATA_ENV, "data"))


def resolve_dataset(name_or_path: str, directory=None) -> tuple:
    """``(path, DatasetInfo or None)`` for a registry name or a CSV path."""
    info = DATASETS.get(name_or_path)
    if info is None:
        for d in DATASETS.values():
            if d.name.lower() == str(name_or_path).lower():
                info = d
    if info is not None:
        path = data_dir(directory) / info.filename
        if not path.exists():
            raise DatasetNotFoundError(
                f"{info.name}: {path} not found; download {info.filename} into {path.parent} "
                f"or set {DATA_ENV}"
            )
        return path, info
    path = Path(name_or_path)
    if not path.exists():
        raise DatasetNotFoundError(f"{path} is neither a registered dataset nor an existing file")
    return path, None


def _floats(text):
    return tuple(float(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _ints(text):
    return tuple(int(float(t)) for t in str(text).split(",") if t.strip())


def _strs(text):
    return tuple(t.strip().lower() for t in str(text).split(",") if t.strip())


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a dataset, the (L, H) grid, strategies and model.

    ``dataset`` is a registry name, a CSV path, or ``synth`` (independent AR
    channels built from ``synth_coefficients``, one ``;``-separated group per
    channel). ``lookback = 0`` picks 36 for ILI and 96 otherwise; empty
    ``horizons`` picks the dataset's benchmark horizons. ``mode`` is
    ``closed_form`` (Linear only) or ``train``.
    """

    dataset: str = "synth"
    data_dir: Optional[str] = None
    split: str = ""
    lookback: int = 0
    horizons: tuple = ()
    strategies: tuple = ("cd", "ci")
    model: str = "linear"
    loss: str = "l2"
    mode: str = "closed_form"
    hidden_units: int = 256
    rank_rate: int = 1
    reg_lambda: float = 1e-2
    ridge: float = 0.0
    learning_rate: Optional[float] = None
    epochs: int = 100
    batch_size: int = 32
    early_stop_patience: Optional[int] = 10
    optimizer: str = "adam"
    seed: int = 0
    sweep: str = ""
    lambda_grid: tuple = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    lookback_grid: tuple = tuple(range(48, 433, 48))
    rank_grid: tuple = (2, 4, 8, 16, 32, 64, 128, 256, 512)
    synth_coefficients: str = "0.8; 0.5, 0.3"
    synth_length: int = 4000
    synth_mixing: float = 0.0
    workers: int = 1
    memory_budget_gb: float = 4.0
    max_lag: Optional[int] = None
    out: str = "runs/experiment"

    def __post_init__(self):
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        bad = set(self.strategies) - {"cd", "ci", "prreg"}
        if bad:
            raise ConfigError(f"unknown strategies {sorted(bad)}")
        if self.model not in ("linear", "mlp", "lowrank"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.loss not in ("l2", "l1"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.mode not in ("closed_form", "train"):
            raise ConfigError(f"mode must be closed_form or train, got {self.mode!r}")
        if self.mode == "closed_form" and self.model != "linear":
            raise ConfigError("closed_form mode needs model = linear")
        if self.mode == "closed_form" and "prreg" in self.strategies:
            raise ConfigError("prreg is a trained strategy; use mode = train")
        if self.sweep not in ("", "lambda", "lookback", "rank"):
            raise ConfigError(f"unknown sweep axis {self.sweep!r}")
        if self.sweep in ("lambda", "rank") and self.mode != "train":
            raise ConfigError(f"{self.sweep} sweep trains models; use mode = train")
        grid = {"lambda": self.lambda_grid, "lookback": self.lookback_grid, "rank": self.rank_grid}
        if self.sweep and not grid[self.sweep]:
            raise ConfigError(f"{self.sweep} sweep needs a non-empty grid")
        if self.lookback < 0 or any(h < 1 for h in self.horizons):
            raise ConfigError("lookback must be >= 0 and horizons >= 1")
        if self.split and self.split not in SPLIT_PRESETS:
            raise ConfigError(f"unknown split preset {self.split!r}; choose from {sorted(SPLIT_PRESETS)}")
        if self.reg_lambda < 0 or any(v < 0 for v in self.lambda_grid):
            raise ConfigError("lambda must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def dataset_info(self) -> Optional[DatasetInfo]:
        return DATASETS.get(self.dataset)

    @property
    def dataset_name(self) -> str:
        if self.dataset == "synth" or self.dataset in DATASETS:
            return self.dataset
        return Path(self.dataset).stem

    def resolved_lookback(self) -> int:
        if self.lookback:
            return self.lookback
        info = self.dataset_info
        return info.lookback if info else 96

    def resolved_horizons(self) -> tuple:
        if self.horizons:
            return tuple(self.horizons)
        info = self.dataset_info
        return info.horizons if info else (48, 96)

    def split_spec(self) -> SplitSpec:
        if self.split:
            return SPLIT_PRESETS[self.split]
        info = self.dataset_info
        return SPLIT_PRESETS[info.split if info else "default"]

    def synth_channels(self) -> tuple:
        groups = [g for g in self.synth_coefficients.split(";") if g.strip()]
        if not groups:
            raise ConfigError("synth_coefficients is empty")
        return tuple(_floats(g) for g in groups)

    def override(self, **kwargs) -> "ExperimentConfig":
        """Copy with every non-None keyword applied."""
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in fields(self) for v in [getattr(self, f.name)]}


SCHEMA = {
    "dataset": str, "data_dir": str, "split": str, "lookback": int, "horizons": _ints,
    "strategies": _strs, "model": lambda s: s.strip().lower(), "loss": lambda s: s.strip().lower(),
    "mode": lambda s: s.strip().lower(), "hidden_units": int, "rank_rate": int,
    "reg_lambda": float, "ridge": float, "learning_rate": _opt_float, "epochs": int,
    "batch_size": int, "early_stop_patience": _opt_int, "optimizer": str, "seed": int,
    "sweep": lambda s: s.strip().lower(), "lambda_grid": _floats, "lookback_grid": _ints,
    "rank_grid": _ints, "synth_coefficients": str, "synth_length": int,
    "synth_mixing": float, "workers": int, "memory_budget_gb": float,
    "max_lag": _opt_int, "out": str,
}


def parse_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                values[key] = SCHEMA[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return values


def load_config(path=None, **overrides) -> ExperimentConfig:
    values = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        values = parse_config_text(p.read_text())
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
