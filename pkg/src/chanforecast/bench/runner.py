"""Experiment orchestration: data preparation, per-point runs, sweeps and artifacts.

A run directory holds::

    config.json          resolved configuration
    results.csv/.json    the ResultTable
    summary.json         CI vs CD comparison per model (when pairs exist)
    drift_report.json    per-channel ACF differences, acf_curves.csv, acf_diff_bars.csv
    risk_report.json     closed-form risk decomposition, risk_bars.csv
    <axis>_curve.csv     sweep curves (lambda, lookback or rank)
    points/<name>/       metrics.json, checkpoint, forecast_sample.csv
    skipped.json         sweep points refused as infeasible
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..acf import drift_report
from ..diagnostics import evaluate, risk_decompose
from ..exceptions import ConfigError, InfeasibleError
from ..models.layers import low_rank_dim
from ..models.training import ModelSpec, TrainConfig, fit
from ..series import MultivariateSeries, fit_normalizer, load_csv, make_windows, split, stack
from ..solver import SolveConfig, ols_cd, ols_ci, save_coefficients
from ..synth import ArSpec, gen_multichannel
from .config import ExperimentConfig, resolve_dataset
from .tables import ResultTable, compare_strategies

logger = logging.getLogger(__name__)

BYTES = 8


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _load(dataset, data_dir, coeffs, length, mixing, seed):
    if dataset == "synth":
        groups = [tuple(float(v) for v in g.split(",") if v.strip()) for g in coeffs.split(";") if g.strip()]
        specs = [ArSpec(g, length, seed=seed) for g in groups]
        return gen_multichannel(specs, mixing=mixing)
    path, info = resolve_dataset(dataset, data_dir)
    return load_csv(path, granularity=info.granularity if info else "")


def load_series(cfg: ExperimentConfig) -> MultivariateSeries:
    return _load(cfg.dataset, cfg.data_dir, cfg.synth_coefficients, cfg.synth_length,
                 cfg.synth_mixing, cfg.seed)


@dataclass(frozen=True)
class Prepared:
    """Normalized splits. ``val``/``test`` include the ``lookback`` rows
    preceding their segment so their first target is the segment's first row."""

    train: MultivariateSeries
    val: MultivariateSeries
    test: MultivariateSeries
    scaler: object


def prepare(cfg: ExperimentConfig, lookback: int, horizon: int) -> Prepared:
    series = load_series(cfg)
    tr, va, te = split(series, cfg.split_spec(), lookback, horizon, overlap=True)
    scaler = fit_normalizer(tr)
    norm = lambda s: s.with_values(scaler.transform(s.values))  # noqa: E731
    return Prepared(norm(tr), norm(va), norm(te), scaler)


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------


def n_parameters(model: str, n_in: int, n_out: int, hidden_units=256, rank_rate=1) -> int:
    if model == "linear":
        return n_in * n_out + n_out
    if model == "mlp":
        return n_in * hidden_units + hidden_units + hidden_units * n_out + n_out
    r = low_rank_dim(n_in, n_out, rank_rate)
    return r * (n_in + n_out) + n_out


def projected_bytes(cfg: ExperimentConfig, strategy: str, n_channels: int, lookback: int,
                    horizon: int, n_samples: int, closed_form: Optional[bool] = None) -> int:
    """Rough peak memory of one fit: design matrices plus either the Gram
    matrix (closed form) or four parameter-sized buffers (Adam training)."""
    closed_form = cfg.mode == "closed_form" if closed_form is None else closed_form
    if strategy == "ci":
        n_in, n_out, rows = lookback, horizon, n_samples * n_channels
    else:
        n_in, n_out, rows = lookback * n_channels, horizon * n_channels, n_samples
    data = rows * (n_in + n_out)
    if closed_form:
        return BYTES * (data + n_in * n_in + n_in * n_out)
    return BYTES * (data + 4 * n_parameters(cfg.model, n_in, n_out, cfg.hidden_units, cfg.rank_rate))


def check_feasible(cfg, strategy, n_channels, lookback, horizon, n_samples, closed_form=None):
    need = projected_bytes(cfg, strategy, n_channels, lookback, horizon, n_samples, closed_form)
    budget = cfg.memory_budget_gb * 1e9
    if need > budget:
        raise InfeasibleError(
            f"{cfg.model} {strategy.upper()} on {n_channels} channels (L={lookback}, H={horizon}) "
            f"needs about {need / 1e9:.1f} GB, budget is {cfg.memory_budget_gb:g} GB"
        )


# ---------------------------------------------------------------------------
# single points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    strategy: str
    horizon: int
    lookback: int
    model: str
    sweep_axis: str = ""
    sweep_value: float = float("nan")

    @property
    def name(self) -> str:
        base = f"{self.model}_{self.strategy}_L{self.lookback}_H{self.horizon}"
        if self.sweep_axis:
            base += f"_{self.sweep_axis}{self.sweep_value:g}"
        return base


def _point_config(cfg: ExperimentConfig, p: Point) -> ExperimentConfig:
    if p.sweep_axis == "lambda":
        return replace(cfg, reg_lambda=p.sweep_value, model=p.model)
    if p.sweep_axis == "rank":
        return replace(cfg, rank_rate=int(p.sweep_value), model=p.model)
    return replace(cfg, model=p.model)


def run_point(cfg: ExperimentConfig, p: Point, run_dir: Optional[str] = None) -> dict:
    """Fit and evaluate one (strategy, L, H, sweep point); returns a table row."""
    cfg = _point_config(cfg, p)
    data = prepare(cfg, p.lookback, p.horizon)
    train = make_windows(data.train, p.lookback, p.horizon)
    val = make_windows(data.val, p.lookback, p.horizon)
    test = make_windows(data.test, p.lookback, p.horizon)
    check_feasible(cfg, p.strategy, train.n_channels, p.lookback, p.horizon, train.n_samples)

    out = Path(run_dir) / "points" / p.name if run_dir else None
    extra = {}
    if cfg.mode == "closed_form":
        solve = ols_cd if p.strategy == "cd" else ols_ci
        coeffs = solve(stack(train), SolveConfig(ridge=cfg.ridge), fit_intercept=False)
        model = coeffs
        extra["condition_number"] = coeffs.condition_number
        if out:
            save_coefficients(coeffs, out / "checkpoint", data.scaler.stats)
    else:
        spec = ModelSpec(cfg.model, p.strategy, cfg.loss, cfg.hidden_units, cfg.rank_rate,
                         cfg.reg_lambda if p.strategy == "prreg" else 0.0)
        tc = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.seed,
                         0.0, cfg.early_stop_patience, cfg.optimizer)
        model = fit(spec, train, tc, val, data.scaler)
        extra["best_epoch"] = model.best_epoch
        extra["epochs_run"] = model.history[-1]["epoch"]
        if out:
            model.save(out / "checkpoint")

    row = {
        "dataset": cfg.dataset_name,
        "model": cfg.model,
        "strategy": p.strategy,
        "horizon": p.horizon,
        "lookback": p.lookback,
        "sweep_axis": p.sweep_axis,
        "sweep_value": p.sweep_value,
        "mse": evaluate(model, test, "mse"),
        "mae": evaluate(model, test, "mae"),
    }
    if out:
        out.mkdir(parents=True, exist_ok=True)
        meta = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
        meta.update(extra, val_mse=evaluate(model, val, "mse"), n_train=train.n_samples,
                    n_test=test.n_samples)
        (out / "metrics.json").write_text(json.dumps(meta, indent=2))
        _write_forecast_sample(model, test, data.test.channel_names, out / "forecast_sample.csv")
    return row


def _write_forecast_sample(model, test, names, path):
    """History, truth and forecast of the first test window in long format."""
    from ..solver import predict

    X = test.X[:1]
    pred = model.predict(X)[0] if hasattr(model, "predict") else predict(model, X)[0]
    rows = []
    L = test.lookback
    for c, name in enumerate(names):
        for t in range(L):
            rows.append((t - L + 1, name, X[0, t, c], np.nan, np.nan))
        for h in range(test.horizon):
            rows.append((h + 1, name, np.nan, test.Y[0, h, c], pred[h, c]))
    pd.DataFrame(rows, columns=["step", "channel", "history", "truth", "forecast"]).to_csv(
        path, index=False, float_format="%.17g")


def _safe_point(cfg, p, run_dir):
    """Worker entry: infeasible points come back as a skip record."""
    try:
        return "ok", run_point(cfg, p, run_dir)
    except InfeasibleError as exc:
        return "skipped", {"point": p.name, "reason": str(exc)}
    except ValueError as exc:
        if p.sweep_axis == "rank" and "rank 0" in str(exc):
            return "skipped", {"point": p.name, "reason": str(exc)}
        raise


# ---------------------------------------------------------------------------
# point grids
# ---------------------------------------------------------------------------


def points(cfg: ExperimentConfig) -> list:
    L = cfg.resolved_lookback()
    pts = []
    for H in cfg.resolved_horizons():
        if cfg.sweep == "lookback":
            pts += [Point(s, H, l, cfg.model, "lookback", float(l)) for l in cfg.lookback_grid for s in cfg.strategies]
        elif cfg.sweep == "rank":
            pts += [Point(s, H, L, "lowrank", "rank", float(r)) for r in cfg.rank_grid for s in cfg.strategies]
        elif cfg.sweep == "lambda":
            pts += [Point(s, H, L, cfg.model) for s in cfg.strategies if s != "prreg"]
            pts += [Point("prreg", H, L, cfg.model, "lambda", float(lam)) for lam in cfg.lambda_grid]
        else:
            pts += [Point(s, H, L, cfg.model) for s in cfg.strategies]
    return pts


def run_points(cfg: ExperimentConfig, pts, run_dir=None):
    """Evaluate points, in a process pool when ``cfg.workers > 1``.

    Results merge by key so completion order does not matter.
    """
    table, skipped = ResultTable(), []
    if cfg.workers > 1 and len(pts) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(pts))) as pool:
            results = list(pool.map(_safe_point, [cfg] * len(pts), pts, [run_dir] * len(pts)))
    else:
        results = [_safe_point(cfg, p, run_dir) for p in pts]
    for status, payload in results:
        if status == "ok":
            table.add(**payload)
        else:
            skipped.append(payload)
    if not cfg.sweep and skipped:
        raise InfeasibleError(skipped[0]["reason"])
    return table, skipped


# ---------------------------------------------------------------------------
# diagnostics artifacts
# ---------------------------------------------------------------------------


def drift(cfg: ExperimentConfig, run_dir=None):
    """ACF drift between the train and test segments (no look-back overlap)."""
    series = load_series(cfg)
    tr, _, te = split(series, cfg.split_spec())
    scaler = fit_normalizer(tr)
    report = drift_report(tr.with_values(scaler.transform(tr.values)),
                          te.with_values(scaler.transform(te.values)), cfg.max_lag)
    if run_dir:
        run_dir = Path(run_dir)
        report.to_json(run_dir / "drift_report.json")
        report.write_curves_csv(run_dir / "acf_curves.csv")
        bars = [{"channel": n, "diff": float(d)} for n, d in zip(report.channel_names, report.diff)]
        bars.append({"channel": "__sum__", "diff": report.sum_diff})
        pd.DataFrame(bars).to_csv(run_dir / "acf_diff_bars.csv", index=False, float_format="%.17g")
    return report


def risk(cfg: ExperimentConfig, run_dir=None) -> list:
    """Closed-form Linear risk decomposition for CD and CI at every horizon."""
    L = cfg.resolved_lookback()
    reports = []
    for H in cfg.resolved_horizons():
        data = prepare(cfg, L, H)
        train = make_windows(data.train, L, H)
        test = make_windows(data.test, L, H)
        d_tr, d_te = stack(train), stack(test)
        for strategy in ("cd", "ci"):
            try:
                check_feasible(cfg, strategy, train.n_channels, L, H, train.n_samples, closed_form=True)
            except InfeasibleError as exc:
                logger.warning("risk %s skipped: %s", strategy, exc)
                continue
            reports.append(risk_decompose(d_tr, d_te, strategy, SolveConfig(ridge=cfg.ridge),
                                          cfg.dataset_name))
    if run_dir:
        run_dir = Path(run_dir)
        (run_dir / "risk_report.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2))
        cols = ["dataset", "L", "H", "strategy", "train_error", "test_error", "gen_error", "w_diff"]
        pd.DataFrame([r.to_dict() for r in reports], columns=cols + ["pythagorean_residual"]).to_csv(
            run_dir / "risk_bars.csv", index=False, float_format="%.17g")
    return reports


# ---------------------------------------------------------------------------
# full run
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    table: ResultTable
    run_dir: Path
    drift: object = None
    risk: list = None
    skipped: list = None


def write_table(table: ResultTable, run_dir) -> None:
    run_dir = Path(run_dir)
    table.write_csv(run_dir / "results.csv")
    table.write_json(run_dir / "results.json")
    try:
        summary = {m: s.to_dict() for m, s in compare_strategies(table).items()}
    except ConfigError:
        summary = {}
    if summary:
        (run_dir / "summary.json").write_text(json.dumps(summary, indent=2))


def _write_curve(table: ResultTable, axis: str, run_dir: Path) -> None:
    df = table.to_frame()
    df = df[df.sweep_axis == axis]
    if axis == "lambda":
        base = table.to_frame()
        base = base[(base.sweep_axis == "") & base.strategy.isin(["cd", "ci"])]
        df = pd.concat([df, base])
    df[["strategy", "horizon", "sweep_value", "lookback", "mse", "mae"]].rename(
        columns={"sweep_value": axis}).to_csv(run_dir / f"{axis}_curve.csv", index=False, float_format="%.17g")


def run(cfg: ExperimentConfig, analyses=("table", "drift", "risk")) -> RunResult:
    """Execute the configured experiment and write its artifacts to ``cfg.out``."""
    run_dir = Path(cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    result = RunResult(ResultTable(), run_dir)
    if "table" in analyses:
        result.table, result.skipped = run_points(cfg, points(cfg), str(run_dir))
        write_table(result.table, run_dir)
        if cfg.sweep:
            _write_curve(result.table, cfg.sweep, run_dir)
        if result.skipped:
            (run_dir / "skipped.json").write_text(json.dumps(result.skipped, indent=2))
    if "drift" in analyses:
        result.drift = drift(cfg, run_dir)
    if "risk" in analyses:
        result.risk = risk(cfg, run_dir)
    return result


__all__ = [
    "Point", "Prepared", "RunResult", "check_feasible", "drift", "load_series",
    "points", "prepare", "projected_bytes", "risk", "run", "run_point", "run_points", "write_table",
]
