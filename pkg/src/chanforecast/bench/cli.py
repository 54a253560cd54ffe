"""``chanforecast`` command line tool.

Subcommands::

    ingest-check   load and validate a dataset, print its shape and split
    acf-diff       train/test ACF drift report
    solve          closed-form Linear CD/CI fits and test metrics
    train          gradient-trained models (linear, mlp, lowrank; cd, ci, prreg)
    risk           closed-form risk decomposition
    sweep          lambda, look-back or rank sweep
    report         merge results.csv files and summarize CI vs CD

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. On failure an error JSON is printed to stderr and written to
``<out>/error.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from ..exceptions import ChanForecastError, ConfigError
from ..series import split
from .config import load_config
from .runner import load_series, run, write_table
from .tables import ResultTable, compare_strategies

logger = logging.getLogger("chanforecast")


def _csv_list(cast):
    def parse(text):
        try:
            return tuple(cast(t) for t in text.split(",") if t.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value experiment file")
    p.add_argument("--dataset", help="registry name (ETTh1, ILI, ...), CSV path, or 'synth'")
    p.add_argument("--data-dir", help="directory holding the benchmark CSVs")
    p.add_argument("--lookback", type=int)
    p.add_argument("--horizon", type=_csv_list(int), help="one or more horizons, comma separated")
    p.add_argument("--strategy", type=_csv_list(str.lower), help="cd, ci, prreg (comma separated)")
    p.add_argument("--lambda", dest="lam", type=_csv_list(float),
                   help="PRReg weight decay; a list sets the lambda sweep grid")
    p.add_argument("--model", choices=("linear", "mlp", "lowrank"))
    p.add_argument("--loss", choices=("l2", "l1"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--split", help="split preset: default, ett-hour, ett-minute")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--max-lag", type=int)
    p.add_argument("--rank-rate", type=int)
    p.add_argument("--hidden-units", type=int)
    p.add_argument("--ridge", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chanforecast", description=__doc__.splitlines()[0].replace("``", ""),
                                     epilog=__doc__.split("\n\n")[-1].replace("``", ""))
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("ingest-check", "validate a dataset"),
        ("acf-diff", "ACF drift report"),
        ("solve", "closed-form Linear"),
        ("train", "gradient training"),
        ("risk", "risk decomposition"),
        ("sweep", "lambda / look-back / rank sweep"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name == "sweep":
            p.add_argument("--axis", choices=("lambda", "lookback", "rank"))
            p.add_argument("--grid", type=_csv_list(float), help="sweep grid override")
            p.add_argument("--mode", choices=("closed_form", "train"))
    p = sub.add_parser("report", help="summarize result tables")
    p.add_argument("runs", nargs="+", help="run directories or results.csv files")
    p.add_argument("--out", help="where to write the merged table and summary")
    p.add_argument("--metric", choices=("mse", "mae"), default="mse")
    return parser


def _config(args, **forced):
    lam = getattr(args, "lam", None)
    overrides = dict(
        dataset=args.dataset, data_dir=args.data_dir, lookback=args.lookback,
        horizons=args.horizon, strategies=args.strategy, model=args.model, loss=args.loss,
        seed=args.seed, out=args.out, split=args.split, epochs=args.epochs,
        learning_rate=args.learning_rate, batch_size=args.batch_size, workers=args.workers,
        max_lag=args.max_lag, rank_rate=args.rank_rate, hidden_units=args.hidden_units,
        ridge=args.ridge,
    )
    if lam:
        if forced.get("sweep") == "lambda" or getattr(args, "axis", None) == "lambda":
            overrides["lambda_grid"] = lam
        else:
            overrides["reg_lambda"] = lam[0]
    overrides.update(forced)
    return load_config(args.config, **overrides)


def _clean(obj):
    """NaN becomes null so stdout stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _emit(obj) -> None:
    print(json.dumps(_clean(obj), indent=2, default=float))


def cmd_ingest_check(args):
    cfg = _config(args)
    series = load_series(cfg)
    L = cfg.resolved_lookback()
    segments = split(series, cfg.split_spec())
    info = {
        "dataset": cfg.dataset_name,
        "n_steps": series.n_steps,
        "n_channels": series.n_channels,
        "channel_names": list(series.channel_names),
        "granularity": series.granularity,
        "split_lengths": [s.n_steps for s in segments],
        "lookback": L,
        "horizons": list(cfg.resolved_horizons()),
    }
    for H in cfg.resolved_horizons():
        split(series, cfg.split_spec(), L, H, overlap=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "ingest.json").write_text(json.dumps(info, indent=2))
    _emit(info)


def cmd_acf_diff(args):
    cfg = _config(args)
    res = run(cfg, analyses=("drift",))
    _emit(res.drift.to_dict())


def cmd_solve(args):
    cfg = _config(args, mode="closed_form")
    res = run(cfg, analyses=("table",))
    _emit({"rows": res.table.rows(), "out": str(res.run_dir)})


def cmd_train(args):
    cfg = _config(args, mode="train")
    res = run(cfg, analyses=("table",))
    _emit({"rows": res.table.rows(), "out": str(res.run_dir)})


def cmd_risk(args):
    cfg = _config(args)
    res = run(cfg, analyses=("risk",))
    _emit([r.to_dict() for r in res.risk])


def cmd_sweep(args):
    forced = {}
    if args.axis:
        forced["sweep"] = args.axis
    if args.mode:
        forced["mode"] = args.mode
    axis = args.axis
    if args.grid and axis:
        key = {"lambda": "lambda_grid", "lookback": "lookback_grid", "rank": "rank_grid"}[axis]
        forced[key] = args.grid if axis == "lambda" else tuple(int(v) for v in args.grid)
    if axis in ("lambda", "rank") and not args.mode:
        forced["mode"] = "train"
    cfg = _config(args, **forced)
    if not cfg.sweep:
        raise ConfigError("sweep needs --axis or a 'sweep' key in the config")
    res = run(cfg, analyses=("table",))
    _emit({"rows": res.table.rows(), "skipped": res.skipped, "out": str(res.run_dir)})


def cmd_report(args):
    table = ResultTable()
    for r in args.runs:
        path = Path(r)
        if path.is_dir():
            path = path / "results.csv"
        if not path.exists():
            raise ConfigError(f"{path} not found")
        table.merge(ResultTable.read_csv(path))
    out = Path(args.out) if args.out else None
    summary = {m: s.to_dict() for m, s in compare_strategies(table, args.metric).items()}
    if out:
        out.mkdir(parents=True, exist_ok=True)
        write_table(table, out)
        table.improvements().to_csv(out / "improvements.csv", index=False, float_format="%.17g")
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    _emit({"summary": summary, "pairs": table.improvements().to_dict("records")})


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "acf-diff": cmd_acf_diff,
    "solve": cmd_solve,
    "train": cmd_train,
    "risk": cmd_risk,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ChanForecastError as exc:
        return _fail(exc.to_dict(), exc.exit_code, args)
    except (ValueError, TypeError) as exc:
        return _fail({"error": "config_error", "type": type(exc).__name__, "message": str(exc)}, 2, args)
    return 0


def _fail(payload, code, args) -> int:
    payload["exit_code"] = code
    text = json.dumps(payload, indent=2)
    print(text, file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "error.json").write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
