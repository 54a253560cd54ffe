import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from chanforecast.bench import (
    DATASETS,
    ExperimentConfig,
    ResultTable,
    compare_strategies,
    improvement,
    load_config,
    parse_config_text,
    run,
)
from chanforecast.bench.cli import main
from chanforecast.bench.runner import check_feasible, points, projected_bytes
from chanforecast.exceptions import ConfigError, DatasetNotFoundError, InfeasibleError
from chanforecast.series import load_csv

SYNTH = dict(dataset="synth", lookback=16, horizons=(8,), synth_length=1500)


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    # keep default run directories out of the working tree
    monkeypatch.chdir(tmp_path)


# -- config -----------------------------------------------------------------


def test_parse_flat_config(tmp_path):
    text = "dataset = ETTh2\nlookback = 96\nhorizons = 48, 96\nstrategies = cd, CI\nlambda_grid = 1e-3, 1\n# note\nepochs = 5\n"
    v = parse_config_text(text)
    assert v["horizons"] == (48, 96) and v["strategies"] == ("cd", "ci") and v["lambda_grid"] == (1e-3, 1.0)
    p = tmp_path / "c.cfg"
    p.write_text(text)
    cfg = load_config(p, epochs=7)
    assert cfg.epochs == 7 and cfg.dataset == "ETTh2"


@pytest.mark.parametrize("text", ["bogus = 1\n", "epochs = many\n", "strategies = \n", "model = rnn\n",
                                  "sweep = lambda\n", "mode = closed_form\nmodel = mlp\n"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        load_config(None, **parse_config_text(text)) if "bogus" not in text and "many" not in text \
            else parse_config_text(text)


def test_config_defaults_by_dataset():
    assert ExperimentConfig(dataset="ILI").resolved_lookback() == 36
    assert ExperimentConfig(dataset="ILI").resolved_horizons() == (24, 36)
    assert ExperimentConfig(dataset="ETTh1").resolved_lookback() == 96
    assert ExperimentConfig(dataset="ETTh1").split_spec().lengths == (8640, 2880, 2880)
    assert ExperimentConfig(dataset="ETTm1").split_spec().lengths == (34560, 11520, 11520)
    assert len(DATASETS) == 9


def test_missing_dataset(tmp_path):
    from chanforecast.bench.config import resolve_dataset

    with pytest.raises(DatasetNotFoundError):
        resolve_dataset("ETTh1", tmp_path)


# -- tables -----------------------------------------------------------------


def _table(cd, ci, model="linear", horizon=48):
    t = ResultTable()
    t.add("d", model, "cd", horizon, cd, cd)
    t.add("d", model, "ci", horizon, ci, ci)
    return t


def test_improvement_examples():
    assert improvement(1.0, 0.8) == pytest.approx(20.0)
    s = compare_strategies(_table(1.0, 0.8))["linear"]
    assert s.n_improved == 1 and s.n_dropped == 0 and s.mean_improvement == pytest.approx(20)
    s = compare_strategies(_table(0.5, 0.5))["linear"]
    assert s.n_improved == 0 and s.n_dropped == 0 and s.mean_improvement == 0
    s = compare_strategies(_table(0.5, 0.6))["linear"]
    assert s.n_dropped == 1


def test_unmatched_rows():
    t = ResultTable()
    t.add("d", "linear", "cd", 48, 1.0, 1.0)
    with pytest.raises(ConfigError):
        compare_strategies(t)


def test_duplicate_rows():
    t = _table(1.0, 0.8)
    with pytest.raises(ValueError):
        t.add("d", "linear", "cd", 48, 1.0, 1.0)


def test_table_csv_round_trip(tmp_path):
    t = _table(0.123456789012345678, 0.2)
    t.add("d", "linear", "prreg", 48, 0.3, 0.4, sweep_axis="lambda", sweep_value=1e-2)
    back = ResultTable.read_csv(t.write_csv(tmp_path / "r.csv"))
    assert back == t
    t.write_json(tmp_path / "r.json")
    assert len(json.loads((tmp_path / "r.json").read_text())["rows"]) == 3


def test_table_order_independent():
    a, b = ResultTable(), ResultTable()
    rows = [("d", "linear", s, h, float(h), 1.0) for s in ("cd", "ci") for h in (48, 96)]
    for r in rows:
        a.add(*r)
    for r in reversed(rows):
        b.add(*r)
    assert a.rows() == b.rows()


# -- runner -----------------------------------------------------------------


def test_points_lambda_sweep():
    cfg = ExperimentConfig(**SYNTH, mode="train", sweep="lambda", lambda_grid=(1e-3, 1.0))
    pts = points(cfg)
    assert [p.strategy for p in pts] == ["cd", "ci", "prreg", "prreg"]
    keys = [(p.strategy, p.sweep_value) for p in pts]
    assert len(set(map(str, keys))) == len(keys)


def test_infeasible_detection():
    # windows are materialized, so even CI on Traffic needs ~12 GB
    cfg = ExperimentConfig(dataset="Traffic", memory_budget_gb=16)
    need = projected_bytes(cfg, "cd", 862, 96, 48, 12185)
    assert need > 16e9 > projected_bytes(cfg, "ci", 862, 96, 48, 12185)
    with pytest.raises(InfeasibleError):
        check_feasible(cfg, "cd", 862, 96, 48, 12185)
    check_feasible(cfg, "ci", 862, 96, 48, 12185)


def test_run_synth_closed_form(tmp_path):
    cfg = ExperimentConfig(**SYNTH, out=str(tmp_path / "run"))
    res = run(cfg)
    assert len(res.table) == 2
    assert all(np.isfinite(r["mse"]) for r in res.table.rows())
    for name in ("results.csv", "results.json", "drift_report.json", "acf_curves.csv",
                 "acf_diff_bars.csv", "risk_report.json", "risk_bars.csv", "config.json", "summary.json"):
        assert (tmp_path / "run" / name).exists(), name
    for rep in res.risk:
        assert rep.pythagorean_residual < 1e-8
    # every emitted CSV re-ingests
    for csv in (tmp_path / "run").rglob("*.csv"):
        assert len(pd.read_csv(csv)) > 0
    assert ResultTable.read_csv(tmp_path / "run" / "results.csv") == res.table


def test_run_deterministic_across_workers(tmp_path):
    base = dict(**SYNTH, mode="train", epochs=2, sweep="lambda", lambda_grid=(1e-4, 1e-2, 1.0))
    a = run(ExperimentConfig(**base, out=str(tmp_path / "a"), workers=1), analyses=("table",))
    b = run(ExperimentConfig(**base, out=str(tmp_path / "b"), workers=3), analyses=("table",))
    assert a.table == b.table
    curve = pd.read_csv(tmp_path / "a" / "lambda_curve.csv")
    assert set(curve.strategy) == {"cd", "ci", "prreg"}


def test_rank_sweep_skips_rank_zero(tmp_path):
    cfg = ExperimentConfig(**SYNTH, mode="train", epochs=1, sweep="rank", rank_grid=(2, 64),
                           strategies=("ci",), out=str(tmp_path))
    res = run(cfg, analyses=("table",))
    assert len(res.table) == 1 and len(res.skipped) == 1


# -- CLI --------------------------------------------------------------------


def _cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("cmd", ["ingest-check", "acf-diff", "solve", "risk"])
def test_cli_subcommands(tmp_path, capsys, cmd):
    code, out, _ = _cli([cmd, "--dataset", "synth", "--lookback", "16", "--horizon", "8",
                         "--out", str(tmp_path)], capsys)
    assert code == 0
    json.loads(out)


def test_cli_train_and_report(tmp_path, capsys):
    code, _, _ = _cli(["train", "--dataset", "synth", "--lookback", "16", "--horizon", "8", "--epochs", "2",
                       "--strategy", "cd,ci,prreg", "--lambda", "0.01", "--out", str(tmp_path / "t")], capsys)
    assert code == 0
    assert (tmp_path / "t" / "results.csv").exists()
    assert list((tmp_path / "t" / "points").glob("*prreg*/checkpoint/model.json"))
    code, out, _ = _cli(["report", str(tmp_path / "t"), "--out", str(tmp_path / "rep")], capsys)
    assert code == 0 and "linear" in json.loads(out)["summary"]


def test_cli_sweep(tmp_path, capsys):
    code, out, _ = _cli(["sweep", "--axis", "lookback", "--grid", "8,16", "--dataset", "synth",
                         "--horizon", "4", "--out", str(tmp_path)], capsys)
    assert code == 0 and len(json.loads(out)["rows"]) == 4


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"dataset = synth\nlookback = 12\nhorizons = 4\nout = {tmp_path / 'o'}\n")
    code, _, _ = _cli(["solve", "--config", str(cfg), "--horizon", "6"], capsys)
    assert code == 0
    assert set(pd.read_csv(tmp_path / "o" / "results.csv").horizon) == {6}


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CHANFORECAST_DATA", str(tmp_path / "empty"))
    code, _, err = _cli(["solve", "--dataset", "ETTh1", "--out", str(tmp_path / "e")], capsys)
    assert code == 3 and json.loads(err)["type"] == "DatasetNotFoundError"
    assert (tmp_path / "e" / "error.json").exists()
    code, _, err = _cli(["train", "--dataset", "synth", "--strategy", "foo"], capsys)
    assert code == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("date,a\n1,1\n2,x\n")
    code, _, _ = _cli(["ingest-check", "--dataset", str(bad)], capsys)
    assert code == 3
    code, _, err = _cli(["train", "--dataset", "synth", "--lookback", "8", "--horizon", "4",
                         "--learning-rate", "1e6", "--epochs", "30", "--model", "mlp", "--hidden-units", "4",
                         "--out", str(tmp_path / "d")], capsys)
    assert code in (0, 4)


def test_cli_infeasible(tmp_path, capsys):
    wide = tmp_path / "wide.csv"
    r = np.random.default_rng(0)
    df = pd.DataFrame(r.standard_normal((300, 60)), columns=[f"c{i}" for i in range(60)])
    df.insert(0, "date", range(300))
    df.to_csv(wide, index=False)
    cfg = tmp_path / "c.cfg"
    cfg.write_text("memory_budget_gb = 0.001\n")
    code, _, err = _cli(["solve", "--config", str(cfg), "--dataset", str(wide), "--lookback", "48",
                         "--horizon", "24", "--strategy", "cd"], capsys)
    assert code == 2 and "InfeasibleError" in err
    assert load_csv(wide).n_channels == 60


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "chanforecast.bench.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("ingest-check", "acf-diff", "solve", "train", "risk", "sweep", "report"):
        assert cmd in out.stdout
