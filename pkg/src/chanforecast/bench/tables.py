"""Result tables keyed by run coordinates, and the CI vs CD comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..exceptions import ConfigError

KEY = ("dataset", "model", "strategy", "horizon", "sweep_axis", "sweep_value")
COLUMNS = KEY + ("lookback", "mse", "mae")


def improvement(cd: float, ci: float) -> float:
    """Percentage improvement of CI over CD, ``100 (CD - CI) / CD``."""
    return 100.0 * (cd - ci) / cd


class ResultTable:
    """Rows keyed by ``(dataset, model, strategy, horizon, sweep_axis, sweep_value)``.

    ``sweep_value`` is None for rows outside a sweep.

    Insertion order never matters: rows are kept in a dict and emitted
    sorted by key, so sweeps merged from a worker pool give identical tables.
    """

    def __init__(self, rows=()):
        self._rows = {}
        for r in rows:
            self.add(**r)

    def add(self, dataset, model, strategy, horizon, mse, mae, lookback=0,
            sweep_axis="", sweep_value=float("nan")):
        key = (str(dataset), str(model), str(strategy), int(horizon), str(sweep_axis or ""),
               _key_float(sweep_value))
        if key in self._rows:
            raise ValueError(f"duplicate result row {key}")
        self._rows[key] = {"lookback": int(lookback), "mse": float(mse), "mae": float(mae)}

    def merge(self, other: "ResultTable") -> "ResultTable":
        for r in other.rows():
            self.add(**r)
        return self

    def __len__(self):
        return len(self._rows)

    def rows(self) -> list:
        out = []
        for key in sorted(self._rows, key=_sort_key):
            row = dict(zip(KEY, key))
            row.update(self._rows[key])
            out.append(row)
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows(), columns=list(COLUMNS))

    def improvements(self) -> pd.DataFrame:
        """One row per matched CD/CI pair with MSE and MAE improvements."""
        df = self.to_frame()
        df = df[df.strategy.isin(["cd", "ci"])]
        if df.empty:
            return pd.DataFrame(columns=["dataset", "model", "horizon", "sweep_axis", "sweep_value",
                                         "mse_cd", "mse_ci", "mse_improvement",
                                         "mae_cd", "mae_ci", "mae_improvement"])
        idx = ["dataset", "model", "horizon", "sweep_axis", "sweep_value"]
        df = df.astype({"sweep_value": float}).fillna({"sweep_value": -np.inf})
        wide = df.pivot_table(index=idx, columns="strategy", values=["mse", "mae"], aggfunc="first")
        if ("mse", "cd") not in wide or ("mse", "ci") not in wide or wide.isna().any().any():
            missing = wide[wide.isna().any(axis=1)].index.tolist() if not wide.empty else []
            raise ConfigError(f"unmatched CD/CI rows: {missing or 'one strategy absent'}")
        out = pd.DataFrame(index=wide.index)
        for m in ("mse", "mae"):
            out[f"{m}_cd"] = wide[(m, "cd")]
            out[f"{m}_ci"] = wide[(m, "ci")]
            out[f"{m}_improvement"] = improvement(out[f"{m}_cd"], out[f"{m}_ci"])
        out = out.reset_index()
        out["sweep_value"] = out["sweep_value"].replace(-np.inf, np.nan)
        return out

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def write_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"rows": self.rows()}, indent=2))
        return path

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        df = pd.read_csv(path, keep_default_na=False, na_values={"sweep_value": [""]}, float_precision="round_trip",
                         dtype={"dataset": str, "model": str, "strategy": str, "sweep_axis": str})
        return cls(df.to_dict("records"))

    def __eq__(self, other):
        return isinstance(other, ResultTable) and self.rows() == other.rows()


def _key_float(v):
    v = float(v) if v is not None and v != "" else float("nan")
    return None if np.isnan(v) else v


def _sort_key(key):
    return key[:5] + ((0, 0.0) if key[5] is None else (1, key[5]),)


@dataclass(frozen=True)
class StrategySummary:
    model: str
    n_pairs: int
    n_improved: int
    n_dropped: int
    mean_improvement: float

    def to_dict(self):
        return dict(self.__dict__)


def compare_strategies(table: ResultTable, metric: str = "mse", threshold: float = 10.0) -> dict:
    """Per-model counts of significant CI gains (> threshold %) and drops
    (< -threshold %), plus the mean improvement."""
    imp = table.improvements()
    out = {}
    for model, grp in imp.groupby("model"):
        vals = grp[f"{metric}_improvement"].to_numpy()
        out[model] = StrategySummary(
            model, len(vals), int(np.sum(vals > threshold)), int(np.sum(vals < -threshold)),
            float(np.mean(vals)),
        )
    return out
