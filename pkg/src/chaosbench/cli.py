"""Command-line interface.

Subcommands: simulate, dataset, train, evaluate, experiment, report. Every
flag can also come from a JSON config file (--config) keyed by flag name;
explicit flags beat the file, the file beats CHAOSBENCH_SEED, and the
environment beats built-in defaults. The resolved configuration is echoed
to stderr so a run is reproducible from its log.

Exit codes: 0 success; 2 usage, bad input, or malformed data; 3 orbit
divergence; 4 shape mismatch; 5 non-finite numerics; 6 partial experiment
grid (some cells failed, completed cell reports are kept).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .dataset import WindowConfig, build_windows, chronological_split, load_dataset_csv, save_dataset_csv, trim_transient
from .errors import DataError, DivergenceError, GridError, NumericError, ShapeError
from .evaluation import evaluate, save_reports_csv
from .experiments import EXPERIMENT_NAMES, resolve_spec, run_experiment
from .io_utils import dump_json, fmt_float
from .map_dynamics import CriterionConfig, MapParams, State, iterate, save_labels_csv, save_trajectory_csv
from .training import (
    MODEL_KINDS,
    TrainConfig,
    fit,
    load_checkpoint,
    make_model,
    save_checkpoint,
    save_train_log_csv,
)

SEED_ENV_VAR = "CHAOSBENCH_SEED"

_PIPELINE_FLAGS = {
    "a": dict(type=float, default=1.4, help="map coefficient a"),
    "b": dict(type=float, default=0.3, help="map coefficient b"),
    "x0": dict(type=float, default=0.1, help="initial x"),
    "y0": dict(type=float, default=0.1, help="initial y"),
    "steps": dict(type=int, default=10000, help="orbit length to simulate"),
    "keep": dict(type=float, default=0.2, help="fraction of the orbit tail to keep"),
}

FLAG_TABLES: dict = {
    "simulate": {
        **_PIPELINE_FLAGS,
        "keep": dict(type=float, default=1.0, help="fraction of the orbit tail to keep"),
        "label_horizons": dict(type=str, default="", help="comma list of lookaheads; adds label_T columns"),
        "theta": dict(type=float, default=0.3, help="event threshold on y"),
        "out": dict(type=str, default="trajectory.csv", help="output CSV path"),
    },
    "dataset": {
        **_PIPELINE_FLAGS,
        "window": dict(type=int, default=1, help="states per input window"),
        "horizon": dict(type=int, default=1, help="steps ahead of the window to target"),
        "stride": dict(type=int, default=1, help="window start spacing"),
        "labels": dict(type=int, default=0, help="1 to add event labels"),
        "theta": dict(type=float, default=0.3, help="event threshold on y"),
        "out": dict(type=str, default="dataset.csv", help="output CSV path"),
    },
    "train": {
        **_PIPELINE_FLAGS,
        "model": dict(type=str, default="lstm", choices=list(MODEL_KINDS), help="model family"),
        "profile": dict(type=str, default="A", choices=["A", "B"], help="recurrent size profile"),
        "window": dict(type=int, default=0, help="states per input window (0: 5 for svr, else 1)"),
        "horizon": dict(type=int, default=1, help="steps ahead of the window to target"),
        "train_frac": dict(type=float, default=0.8, help="chronological train fraction"),
        "labels": dict(type=int, default=0, help="1 to label events for later evaluation"),
        "theta": dict(type=float, default=0.3, help="event threshold on y"),
        "dataset": dict(type=str, default="", help="dataset CSV (skips the simulate pipeline)"),
        "epochs": dict(type=int, default=50, help="training epochs"),
        "batch_size": dict(type=int, default=32, help="mini-batch size"),
        "learning_rate": dict(type=float, default=0.001, help="Adam step size"),
        "output_activation": dict(type=str, default="linear", choices=["linear", "softmax"], help="fnn head"),
        "seed": dict(type=int, default=0, help="master seed"),
        "out_checkpoint": dict(type=str, default="checkpoint.json", help="checkpoint path"),
        "out_log": dict(type=str, default="train_log.csv", help="per-epoch log path"),
    },
    "evaluate": {
        **_PIPELINE_FLAGS,
        "checkpoint": dict(type=str, default="checkpoint.json", help="checkpoint to load"),
        "dataset": dict(type=str, default="", help="dataset CSV (skips the simulate pipeline)"),
        "window": dict(type=int, default=0, help="states per input window (0: infer from checkpoint)"),
        "horizon": dict(type=int, default=1, help="steps ahead of the window to target"),
        "train_frac": dict(type=float, default=0.8, help="chronological train fraction"),
        "labels": dict(type=int, default=0, help="1 to score event accuracy"),
        "theta": dict(type=float, default=0.3, help="event threshold on y"),
        "out": dict(type=str, default="", help="optional report CSV path"),
    },
    "experiment": {
        "name": dict(type=str, default="model_comparison", choices=list(EXPERIMENT_NAMES), help="experiment"),
        "out_dir": dict(type=str, default="runs", help="output directory root"),
        "seed": dict(type=int, default=0, help="master seed"),
        "jobs": dict(type=int, default=1, help="concurrent cells"),
        "cell": dict(type=int, default=None, action="append", help="run only this cell index (repeatable)"),
        "sizes": dict(type=str, default="", help="override: comma list of dataset sizes"),
        "horizons": dict(type=str, default="", help="override: comma list of horizons"),
        "models": dict(type=str, default="", help="override: comma list of model kinds"),
        "n_seeds": dict(type=int, default=0, help="override: replicates per cell (0: default)"),
        "profile": dict(type=str, default="", help="override: recurrent size profile"),
        "epochs": dict(type=int, default=0, help="override: training epochs (0: default)"),
        "steps": dict(type=int, default=0, help="override: orbit length (attractor_criterion)"),
        "theta": dict(type=float, default=None, help="override: event threshold"),
        "figure": dict(type=int, default=1, help="0 to skip figure rendering"),
    },
    "report": {
        "input": dict(type=str, default="reports.csv", help="per-seed report CSV"),
        "out": dict(type=str, default="aggregate.csv", help="aggregated CSV path"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosbench",
        description="Forecasting benchmark on the Henon map.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in FLAG_TABLES.items():
        p = sub.add_parser(command, help=f"{command} subcommand")
        p.add_argument("--config", type=str, default=None, help="JSON file with flag values")
        for name, spec in table.items():
            kwargs = dict(type=spec["type"], default=None, help=spec["help"])
            if "choices" in spec:
                kwargs["choices"] = spec["choices"]
            if spec.get("action") == "append":
                kwargs["action"] = "append"
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, **kwargs)
    return parser


def _resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, CHAOSBENCH_SEED, config file, and explicit flags."""
    table = FLAG_TABLES[command]
    resolved = {name: spec["default"] for name, spec in table.items()}
    if "seed" in table:
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                resolved["seed"] = int(env)
            except ValueError as e:
                raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from e
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                blob = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"{args.config}: unreadable config ({e})") from e
        if not isinstance(blob, dict):
            raise DataError(f"{args.config}: config must be a JSON object")
        for key, value in blob.items():
            if key not in table:
                raise ValueError(f"config key {key!r} is not a flag of {command!r}")
            resolved[key] = value
    for name in table:
        value = getattr(args, name)
        if value is not None:
            resolved[name] = value
    return resolved


def _echo(command: str, cfg: dict) -> None:
    print(f"config[{command}]: {dump_json(cfg)}", file=sys.stderr)


def _int_list(value, flag: str) -> list:
    if isinstance(value, list):
        return [int(v) for v in value]
    text = str(value).strip()
    if not text:
        return []
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as e:
        raise ValueError(f"--{flag} expects comma-separated integers, got {value!r}") from e


def _str_list(value) -> list:
    if isinstance(value, list):
        return [str(v) for v in value]
    text = str(value).strip()
    return [part for part in text.split(",") if part] if text else []


def _pipeline_trajectory(cfg: dict):
    traj = iterate(State(cfg["x0"], cfg["y0"]), int(cfg["steps"]), MapParams(cfg["a"], cfg["b"]))
    return trim_transient(traj, float(cfg["keep"]))


def cmd_simulate(cfg: dict) -> int:
    trimmed = _pipeline_trajectory(cfg)
    horizons = _int_list(cfg["label_horizons"], "label-horizons")
    if horizons:
        save_labels_csv(trimmed, horizons, float(cfg["theta"]), cfg["out"])
    else:
        save_trajectory_csv(trimmed, cfg["out"])
    print(f"wrote {cfg['out']} ({len(trimmed)} states)", file=sys.stderr)
    return 0


def cmd_dataset(cfg: dict) -> int:
    trimmed = _pipeline_trajectory(cfg)
    wcfg = WindowConfig(window_len=int(cfg["window"]), horizon=int(cfg["horizon"]), stride=int(cfg["stride"]))
    criterion = CriterionConfig(theta=float(cfg["theta"]), horizon=wcfg.horizon) if cfg["labels"] else None
    ds = build_windows(trimmed, wcfg, criterion)
    save_dataset_csv(ds, cfg["out"])
    print(f"wrote {cfg['out']} ({len(ds)} samples)", file=sys.stderr)
    return 0


def _train_window(cfg: dict) -> int:
    window = int(cfg["window"])
    if window == 0:
        return 5 if cfg["model"] == "svr" else 1
    return window


def cmd_train(cfg: dict) -> int:
    if cfg["dataset"]:
        ds = load_dataset_csv(cfg["dataset"])
        window = ds.config.window_len
    else:
        window = _train_window(cfg)
        trimmed = _pipeline_trajectory(cfg)
        wcfg = WindowConfig(window_len=window, horizon=int(cfg["horizon"]))
        criterion = CriterionConfig(theta=float(cfg["theta"]), horizon=wcfg.horizon) if cfg["labels"] else None
        ds = build_windows(trimmed, wcfg, criterion)
    split = chronological_split(ds, float(cfg["train_frac"]))
    model = make_model(
        cfg["model"],
        window_len=window,
        profile=cfg["profile"],
        seed=int(cfg["seed"]),
        output_activation=cfg["output_activation"],
        map_b=float(cfg["b"]),
    )
    train_cfg = TrainConfig(
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]),
        seed=int(cfg["seed"]),
    )
    log = fit(model, split, train_cfg)
    save_checkpoint(cfg["out_checkpoint"], model, train_cfg)
    save_train_log_csv(log, cfg["out_log"])
    print(f"wrote {cfg['out_checkpoint']} and {cfg['out_log']}", file=sys.stderr)
    print(f"mse={fmt_float(log.final_test_mse)}")
    return 0


def cmd_evaluate(cfg: dict) -> int:
    model, _ = load_checkpoint(cfg["checkpoint"])
    if cfg["dataset"]:
        ds = load_dataset_csv(cfg["dataset"])
    else:
        window = int(cfg["window"])
        if window == 0:
            if model.kind == "fnn":
                window = model.input_width // 2
            elif model.kind in ("rf", "svr"):
                width = model.input_width if model.kind == "rf" else model.w.size
                window = int(width) // 2
            else:
                window = 1
        trimmed = _pipeline_trajectory(cfg)
        wcfg = WindowConfig(window_len=window, horizon=int(cfg["horizon"]))
        criterion = CriterionConfig(theta=float(cfg["theta"]), horizon=wcfg.horizon) if cfg["labels"] else None
        ds = build_windows(trimmed, wcfg, criterion)
    split = chronological_split(ds, float(cfg["train_frac"]))
    criterion = None
    if cfg["labels"]:
        criterion = CriterionConfig(theta=float(cfg["theta"]), horizon=split.test.config.horizon)
    report = evaluate(model, split.test, criterion)
    if cfg["out"]:
        save_reports_csv([report], cfg["out"])
        print(f"wrote {cfg['out']}", file=sys.stderr)
    print(f"mse_both={fmt_float(report.test_mse_both)}")
    print(f"mse_x={fmt_float(report.test_mse_x)}")
    if report.event_accuracy is not None:
        print(f"event_acc={fmt_float(report.event_accuracy)}")
        print(f"base_rate={fmt_float(report.event_base_rate)}")
    return 0


def cmd_experiment(cfg: dict) -> int:
    overrides: dict = {}
    if cfg["sizes"]:
        overrides["sizes"] = _int_list(cfg["sizes"], "sizes")
    if cfg["horizons"]:
        overrides["horizons"] = _int_list(cfg["horizons"], "horizons")
    if cfg["models"]:
        overrides["models"] = _str_list(cfg["models"])
    if cfg["n_seeds"]:
        overrides["n_seeds"] = int(cfg["n_seeds"])
    if cfg["profile"]:
        overrides["profile"] = cfg["profile"]
    if cfg["epochs"]:
        overrides["epochs"] = int(cfg["epochs"])
    if cfg["steps"]:
        overrides["steps"] = int(cfg["steps"])
    if cfg["theta"] is not None:
        overrides["theta"] = float(cfg["theta"])
    spec = resolve_spec(cfg["name"], overrides, master_seed=int(cfg["seed"]), output_dir=cfg["out_dir"])
    cell_filter = None if cfg["cell"] is None else [int(c) for c in cfg["cell"]]
    result = run_experiment(spec, jobs=int(cfg["jobs"]), cell_filter=cell_filter, render_figure=bool(cfg["figure"]))
    where = result.summary_path or f"{spec.output_dir}/{spec.name}"
    print(f"wrote {where} ({len(result.rows)} rows)", file=sys.stderr)
    return 0


def cmd_report(cfg: dict) -> int:
    from .evaluation import aggregate_seeds, load_reports_csv, save_aggregate_csv

    reports = load_reports_csv(cfg["input"])
    save_aggregate_csv(aggregate_seeds(reports), cfg["out"])
    print(f"wrote {cfg['out']}", file=sys.stderr)
    return 0


_DISPATCH = {
    "simulate": cmd_simulate,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        cfg = _resolve(args.command, args)
        _echo(args.command, cfg)
        return _DISPATCH[args.command](cfg)
    except GridError as e:
        print(f"error: {e}", file=sys.stderr)
        return 6
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5
    except ShapeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (DataError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
