"""Named experiment grids: deterministic cells, CSV reports, SVG figures.

Each experiment is a grid of independent cells. Every replicate inside a
cell draws its seed as derive_seed(master_seed, cell_index, replicate), so
any cell can be recomputed in isolation (or in parallel) and must produce
exactly the rows the full run produces. Outputs land under
``<output_dir>/<experiment>/``: per-cell ``<cell_id>/report.csv``, merged
``summary.csv``, ``aggregate.csv`` (mean/std over seeds, when metrics
exist), ``figure.svg``, and ``config.json``. CSV content carries no
timestamps, so reruns are byte-identical.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .dataset import WindowConfig, build_windows, chronological_split, trim_transient
from .errors import ChaosBenchError, GridError
from .evaluation import (
    REPORT_HEADER,
    EvalReport,
    aggregate_seeds,
    evaluate,
    report_row,
    save_aggregate_csv,
)
from .io_utils import atomic_write_json, atomic_write_text, dump_json, fmt_float
from .map_dynamics import CriterionConfig, MapParams, State, Trajectory, iterate, label_extreme_events
from .numerics import derive_seed
from .training import TrainConfig, fit, make_model

EXPERIMENT_NAMES = (
    "attractor_criterion",
    "model_comparison",
    "sample_size_sweep",
    "horizon_accuracy",
    "mse_heatmap",
)

# Externally reported MSE values carried as a side-by-side reference column
# in model_comparison output. Context only; nothing asserts against them.
REFERENCE_MSE = {
    "rf": 0.5590726121211392,
    "rnn": 0.5651870153693168,
    "lstm": 2.0027390680736243e-06,
    "svr": 0.4274929286882515,
    "fnn": 0.6486854565019292,
}

_COMMON_GRID = {
    "a": 1.4,
    "b": 0.3,
    "x0": 0.1,
    "y0": 0.1,
    "keep": 0.2,
    "train_frac": 0.8,
    "window_len": 1,
    "svr_window_len": 5,
    "epochs": 50,
    "batch_size": 32,
    "learning_rate": 0.001,
    "profile": "A",
    "theta": 0.3,
}


def default_grid(name: str) -> dict:
    """Full parameter grid for a named experiment, before overrides."""
    if name == "attractor_criterion":
        return {
            "a": 1.4,
            "b": 0.3,
            "x0": 0.1,
            "y0": 0.1,
            "keep": 0.2,
            "steps": 10000,
            "theta": 0.3,
            "horizons": [4, 6, 8],
        }
    if name == "model_comparison":
        return dict(_COMMON_GRID, models=["rf", "rnn", "lstm", "svr", "fnn"], sizes=[2000], horizons=[1], n_seeds=1)
    if name == "sample_size_sweep":
        return dict(
            _COMMON_GRID,
            models=["fnn", "lstm"],
            sizes=[10000, 20000, 30000, 40000, 50000],
            horizons=[1],
            n_seeds=3,
        )
    if name == "horizon_accuracy":
        return dict(
            _COMMON_GRID,
            models=["fnn", "lstm"],
            sizes=[1000, 300000],
            horizons=[1, 2, 3, 4, 5, 6, 7, 8],
            n_seeds=3,
            labelled=True,
        )
    if name == "mse_heatmap":
        return dict(
            _COMMON_GRID,
            models=["lstm"],
            sizes=[10000, 20000, 30000, 40000, 50000],
            horizons=[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            n_seeds=3,
        )
    raise ValueError(f"unknown experiment {name!r}; expected one of {EXPERIMENT_NAMES}")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    grid: dict
    master_seed: int = 0
    output_dir: str = "runs"


@dataclass(frozen=True)
class Cell:
    index: int
    cell_id: str
    params: dict


@dataclass
class CellResult:
    cell: Cell
    rows: list
    reports: list


@dataclass
class GridResult:
    spec: ExperimentSpec
    header: str
    rows: list
    reports: list
    summary_path: str | None = None
    figure_path: str | None = None


def resolve_spec(
    name: str,
    overrides: dict | None = None,
    master_seed: int = 0,
    output_dir: str = "runs",
) -> ExperimentSpec:
    """Merge overrides into the default grid; unknown keys are an error."""
    grid = default_grid(name)
    for key, value in (overrides or {}).items():
        if key not in grid:
            raise ValueError(f"experiment {name!r} has no grid key {key!r}")
        grid[key] = value
    _validate_grid(name, grid)
    return ExperimentSpec(name=name, grid=grid, master_seed=int(master_seed), output_dir=str(output_dir))


def _validate_grid(name: str, grid: dict) -> None:
    for key in ("horizons",):
        if key in grid:
            values = grid[key]
            if not values or any(int(v) < 1 for v in values):
                raise ValueError(f"{key} must be a non-empty list of positive ints")
            grid[key] = [int(v) for v in values]
    if "sizes" in grid:
        if not grid["sizes"] or any(int(s) < 10 for s in grid["sizes"]):
            raise ValueError("sizes must be a non-empty list of ints >= 10")
        grid["sizes"] = [int(s) for s in grid["sizes"]]
    if "models" in grid:
        from .training import MODEL_KINDS

        bad = [m for m in grid["models"] if m not in MODEL_KINDS]
        if not grid["models"] or bad:
            raise ValueError(f"models must be a non-empty subset of {MODEL_KINDS}, got {grid['models']}")
    if "n_seeds" in grid and int(grid["n_seeds"]) < 1:
        raise ValueError("n_seeds must be >= 1")
    if name == "attractor_criterion" and int(grid["steps"]) < 1:
        raise ValueError("steps must be >= 1")


def resolved_config(spec: ExperimentSpec) -> dict:
    """The dict embedded in every output; excludes execution-only settings."""
    return {"experiment": spec.name, "master_seed": spec.master_seed, "grid": spec.grid}


def enumerate_cells(spec: ExperimentSpec) -> list:
    """Deterministic cell list; the index is part of every derived seed."""
    grid = spec.grid
    cells = []
    if spec.name == "attractor_criterion":
        cells.append(Cell(0, "000-orbit", {}))
        return cells
    idx = 0
    if spec.name == "mse_heatmap":
        model = grid["models"][0]
        for size in grid["sizes"]:
            for horizon in grid["horizons"]:
                cells.append(
                    Cell(idx, f"{idx:03d}-{model}-s{size}-h{horizon}", {"model": model, "size": size, "horizon": horizon})
                )
                idx += 1
        return cells
    for model in grid["models"]:
        for size in grid["sizes"]:
            for horizon in grid["horizons"]:
                cells.append(
                    Cell(idx, f"{idx:03d}-{model}-s{size}-h{horizon}", {"model": model, "size": size, "horizon": horizon})
                )
                idx += 1
    return cells


def summary_header(spec: ExperimentSpec) -> str:
    if spec.name == "attractor_criterion":
        return "x,y," + ",".join(f"sat_T{h}" for h in spec.grid["horizons"])
    if spec.name == "model_comparison":
        return REPORT_HEADER + ",reference_mse"
    return REPORT_HEADER


def _pipeline_trajectory(size: int, grid: dict) -> Trajectory:
    """Simulate long enough that the kept tail is exactly ``size`` states."""
    keep = grid["keep"]
    steps = math.ceil(size / keep)
    while int(keep * steps) < size:
        steps += 1
    traj = iterate(State(grid["x0"], grid["y0"]), steps, MapParams(grid["a"], grid["b"]))
    trimmed = trim_transient(traj, keep)
    if len(trimmed) > size:
        extra = len(trimmed) - size
        before = trimmed.states[extra - 1]
        trimmed = Trajectory(
            states=trimmed.states[extra:],
            params=trimmed.params,
            initial=State(float(before[0]), float(before[1])),
        )
    return trimmed


def train_and_score(grid: dict, model_kind: str, size: int, horizon: int, seed: int) -> EvalReport:
    """One replicate: pipeline, fit, held-out report with grid keys filled."""
    trimmed = _pipeline_trajectory(size, grid)
    window_len = int(grid["svr_window_len"] if model_kind == "svr" else grid["window_len"])
    criterion = CriterionConfig(theta=grid["theta"], horizon=horizon) if grid.get("labelled") else None
    ds = build_windows(trimmed, WindowConfig(window_len=window_len, horizon=horizon), criterion)
    split = chronological_split(ds, grid["train_frac"])
    model = make_model(
        model_kind,
        window_len=window_len,
        profile=grid["profile"],
        seed=seed,
        map_b=grid["b"],
    )
    cfg = TrainConfig(
        epochs=int(grid["epochs"]),
        batch_size=int(grid["batch_size"]),
        learning_rate=float(grid["learning_rate"]),
        seed=seed,
    )
    fit(model, split, cfg)
    report = evaluate(model, split.test, criterion)
    return replace(report, sample_size=size, seed=seed)


def run_cell(spec: ExperimentSpec, cell: Cell) -> CellResult:
    """Compute one cell's rows. Pure function of (spec, cell): safe to farm out."""
    grid = spec.grid
    if spec.name == "attractor_criterion":
        traj = iterate(State(grid["x0"], grid["y0"]), int(grid["steps"]), MapParams(grid["a"], grid["b"]))
        trimmed = trim_transient(traj, grid["keep"])
        horizons = grid["horizons"]
        labels = {
            h: label_extreme_events(trimmed, CriterionConfig(theta=grid["theta"], horizon=h)) for h in horizons
        }
        n_rows = len(trimmed) - max(horizons)
        rows = []
        for i in range(n_rows):
            cells_out = [fmt_float(trimmed.states[i, 0]), fmt_float(trimmed.states[i, 1])]
            cells_out.extend(str(int(labels[h][i])) for h in horizons)
            rows.append(",".join(cells_out))
        return CellResult(cell=cell, rows=rows, reports=[])

    reports = []
    rows = []
    for r in range(int(grid["n_seeds"])):
        seed = derive_seed(spec.master_seed, cell.index, r)
        report = train_and_score(grid, cell.params["model"], cell.params["size"], cell.params["horizon"], seed)
        reports.append(report)
        row = report_row(report)
        if spec.name == "model_comparison":
            row += f",{fmt_float(REFERENCE_MSE[cell.params['model']])}"
        rows.append(row)
    return CellResult(cell=cell, rows=rows, reports=reports)


def _write_cell_report(spec: ExperimentSpec, result: CellResult) -> None:
    cell_dir = Path(spec.output_dir) / spec.name / result.cell.cell_id
    lines = [
        f"# config: {dump_json(resolved_config(spec))}",
        f"# cell: {dump_json({'id': result.cell.cell_id, 'index': result.cell.index})}",
        summary_header(spec),
    ]
    lines.extend(result.rows)
    atomic_write_text(cell_dir / "report.csv", "\n".join(lines) + "\n")


def run_experiment(
    spec: ExperimentSpec,
    jobs: int = 1,
    cell_filter: list | None = None,
    render_figure: bool = True,
) -> GridResult:
    """Run the grid (or a filtered subset) and write all outputs.

    Cell failures do not stop other cells; after the sweep a GridError
    lists every failed cell and completed per-cell reports stay on disk.
    The merged summary, aggregate, figure, and config are only written for
    full-grid successes, never for a filtered run.
    """
    cells = enumerate_cells(spec)
    if cell_filter is not None:
        bad = [k for k in cell_filter if not (0 <= k < len(cells))]
        if bad:
            raise ValueError(f"cell index out of range {bad}; grid has {len(cells)} cells")
        selected = [cells[k] for k in cell_filter]
    else:
        selected = cells

    results: dict = {}
    failures: list = []
    if jobs > 1 and len(selected) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_cell, spec, cell): cell for cell in selected}
            for future, cell in futures.items():
                try:
                    results[cell.index] = future.result()
                except ChaosBenchError as e:
                    failures.append(f"{cell.cell_id}: {e}")
    else:
        for cell in selected:
            try:
                results[cell.index] = run_cell(spec, cell)
            except ChaosBenchError as e:
                failures.append(f"{cell.cell_id}: {e}")

    for index in sorted(results):
        _write_cell_report(spec, results[index])
    if failures:
        raise GridError(failures)

    header = summary_header(spec)
    rows = []
    reports = []
    for index in sorted(results):
        rows.extend(results[index].rows)
        reports.extend(results[index].reports)
    out = GridResult(spec=spec, header=header, rows=rows, reports=reports)
    if cell_filter is not None:
        return out

    exp_dir = Path(spec.output_dir) / spec.name
    config_comment = dump_json(resolved_config(spec))
    summary_path = exp_dir / "summary.csv"
    atomic_write_text(summary_path, "\n".join([f"# config: {config_comment}", header, *rows]) + "\n")
    out.summary_path = str(summary_path)
    atomic_write_json(exp_dir / "config.json", resolved_config(spec))
    if reports:
        save_aggregate_csv(aggregate_seeds(reports), exp_dir / "aggregate.csv", meta_comment=config_comment)
    if render_figure:
        figure_path = exp_dir / "figure.svg"
        _render_figure(spec, header, rows, figure_path)
        out.figure_path = str(figure_path)
    return out


# --- figures ---------------------------------------------------------------
# Rendered from the merged CSV rows, so the plot can only show data that is
# in the files. matplotlib writes SVG without a creation date to keep byte
# content stable.


def _parse_rows(header: str, rows: list) -> list:
    names = header.split(",")
    return [dict(zip(names, row.split(","))) for row in rows]


def _save_svg(fig, path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    atomic_write_text(path, buf.getvalue().decode("utf-8"))


def _render_figure(spec: ExperimentSpec, header: str, rows: list, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    # Fixed hash salt so clip-path ids are content-derived, not uuid4:
    # reruns of the same grid must produce byte-identical SVG.
    matplotlib.rcParams["svg.hashsalt"] = "chaosbench"
    import matplotlib.pyplot as plt

    records = _parse_rows(header, rows)
    name = spec.name
    fig = None
    try:
        if name == "attractor_criterion":
            fig = _fig_attractor(plt, spec, records)
        elif name == "model_comparison":
            fig = _fig_model_comparison(plt, records)
        elif name == "sample_size_sweep":
            fig = _fig_sample_size(plt, records)
        elif name == "horizon_accuracy":
            fig = _fig_horizon_accuracy(plt, records)
        elif name == "mse_heatmap":
            fig = _fig_heatmap(plt, spec, records)
        if fig is not None:
            _save_svg(fig, path)
    finally:
        if fig is not None:
            plt.close(fig)


def _fig_attractor(plt, spec: ExperimentSpec, records: list):
    horizons = spec.grid["horizons"]
    xs = [float(r["x"]) for r in records]
    ys = [float(r["y"]) for r in records]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(xs, ys, s=2, c="0.3", label="no event", linewidths=0)
    colors = ["tab:orange", "tab:pink", "tab:cyan", "tab:green", "tab:red"]
    for i, h in enumerate(horizons):
        sel_x = [float(r["x"]) for r in records if r[f"sat_T{h}"] == "1"]
        sel_y = [float(r["y"]) for r in records if r[f"sat_T{h}"] == "1"]
        ax.scatter(sel_x, sel_y, s=2, c=colors[i % len(colors)], label=f"event in {h} steps", linewidths=0)
    ax.axhline(spec.grid["theta"], color="tab:red", linestyle="--", linewidth=0.8, label="threshold")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="lower left", markerscale=4, fontsize=8)
    ax.set_title("attractor points that lead to a threshold crossing")
    return fig


def _fig_model_comparison(plt, records: list):
    models = [r["model"] for r in records]
    mse = [float(r["mse_both"]) for r in records]
    ref = [float(r["reference_mse"]) for r in records]
    pos = range(len(models))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.scatter(pos, mse, marker="o", label="this run")
    ax.scatter(pos, ref, marker="x", label="reference")
    ax.set_yscale("log")
    ax.set_xticks(list(pos), models)
    ax.set_ylabel("test MSE")
    ax.legend()
    ax.set_title("one-step forecast error by model")
    return fig


def _group_stats(records: list, key_fields: tuple, value_field: str) -> dict:
    import numpy as np

    groups: dict = {}
    for r in records:
        if not r[value_field]:
            continue
        key = tuple(r[k] for k in key_fields)
        groups.setdefault(key, []).append(float(r[value_field]))
    return {k: (float(np.mean(v)), float(np.std(v))) for k, v in groups.items()}


def _fig_sample_size(plt, records: list):
    stats = _group_stats(records, ("model", "samples"), "mse_both")
    models = sorted({k[0] for k in stats})
    sizes = sorted({int(k[1]) for k in stats})
    width = 0.8 / len(models)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for mi, model in enumerate(models):
        means = [stats[(model, str(s))][0] for s in sizes]
        stds = [stats[(model, str(s))][1] for s in sizes]
        xs = [i + mi * width for i in range(len(sizes))]
        ax.bar(xs, means, width=width, yerr=stds, capsize=3, label=model)
    ax.set_xticks([i + width * (len(models) - 1) / 2 for i in range(len(sizes))], [str(s) for s in sizes])
    ax.set_yscale("log")
    ax.set_xlabel("dataset size (kept states)")
    ax.set_ylabel("test MSE")
    ax.legend()
    ax.set_title("forecast error vs dataset size")
    return fig


def _fig_horizon_accuracy(plt, records: list):
    stats = _group_stats(records, ("model", "samples", "horizon"), "event_acc")
    pairs = sorted({(k[0], int(k[1])) for k in stats})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for model, size in pairs:
        horizons = sorted({int(k[2]) for k in stats if k[0] == model and int(k[1]) == size})
        means = [stats[(model, str(size), str(h))][0] for h in horizons]
        stds = [stats[(model, str(size), str(h))][1] for h in horizons]
        ax.errorbar(horizons, means, yerr=stds, marker="o", capsize=3, label=f"{model}, {size} samples")
    ax.set_xlabel("prediction horizon (steps)")
    ax.set_ylabel("event accuracy")
    ax.legend()
    ax.set_title("event accuracy vs horizon")
    return fig


def _fig_heatmap(plt, spec: ExperimentSpec, records: list):
    import numpy as np
    from matplotlib.colors import LogNorm

    stats = _group_stats(records, ("samples", "horizon"), "mse_both")
    sizes = spec.grid["sizes"]
    horizons = spec.grid["horizons"]
    grid = np.empty((len(horizons), len(sizes)))
    for i, h in enumerate(horizons):
        for j, s in enumerate(sizes):
            grid[i, j] = stats[(str(s), str(h))][0]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    # Color is linear in log10(MSE): LogNorm over the data range.
    im = ax.imshow(grid, aspect="auto", origin="lower", norm=LogNorm(vmin=grid.min(), vmax=grid.max()))
    ax.set_xticks(range(len(sizes)), [str(s) for s in sizes])
    ax.set_yticks(range(len(horizons)), [str(h) for h in horizons])
    ax.set_xlabel("dataset size (kept states)")
    ax.set_ylabel("prediction horizon (steps)")
    fig.colorbar(im, ax=ax, label="mean test MSE")
    ax.set_title("forecast error across size and horizon")
    return fig
