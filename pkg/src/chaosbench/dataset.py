"""Turn orbits into supervised windows: trim, window, label, split, CSV I/O.

A sample pairs ``window_len`` consecutive states (flattened oldest-first as
x, y, x, y, ...) with the single state ``horizon`` steps past the window's
end. Splitting is chronological; samples are never shuffled here, so the
test block is strictly later in time than every training sample.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .io_utils import atomic_write_text, dump_json, fmt_float, read_csv_rows
from .map_dynamics import CriterionConfig, State, Trajectory


@dataclass(frozen=True)
class WindowConfig:
    """Windowing rule: window_len past states, target horizon steps ahead."""

    window_len: int = 1
    horizon: int = 1
    stride: int = 1

    def __post_init__(self) -> None:
        if self.window_len < 1:
            raise ValueError(f"window_len must be >= 1, got {self.window_len}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


@dataclass(frozen=True)
class WindowedDataset:
    """Aligned arrays: inputs (M, 2*window_len), targets (M, 2), labels (M,) or None."""

    inputs: np.ndarray
    targets: np.ndarray
    event_labels: np.ndarray | None
    config: WindowConfig

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def slice(self, start: int, stop: int) -> "WindowedDataset":
        labels = None if self.event_labels is None else self.event_labels[start:stop]
        return replace(self, inputs=self.inputs[start:stop], targets=self.targets[start:stop], event_labels=labels)


@dataclass(frozen=True)
class SplitDataset:
    train: WindowedDataset
    test: WindowedDataset
    split_fraction: float


def trim_transient(traj: Trajectory, keep_fraction: float = 0.2) -> Trajectory:
    """Keep the final floor(keep_fraction * len) states of the orbit.

    The returned trajectory's ``initial`` is the state just before the kept
    block, so stepping metadata stays valid.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    kept = int(keep_fraction * len(traj))
    if kept < 1:
        raise DataError(f"keep_fraction {keep_fraction} of {len(traj)} states keeps nothing")
    start = len(traj) - kept
    if start == 0:
        return traj
    before = traj.states[start - 1]
    return Trajectory(
        states=traj.states[start:],
        params=traj.params,
        initial=State(float(before[0]), float(before[1])),
    )


def build_windows(
    traj: Trajectory,
    config: WindowConfig = WindowConfig(),
    criterion: CriterionConfig | None = None,
) -> WindowedDataset:
    """Slide a window along the orbit and pair it with the lookahead state.

    Sample k covers states [k*stride, k*stride + window_len) and targets the
    state at k*stride + window_len - 1 + horizon. When a criterion is given
    its horizon must equal the window horizon, and each sample is labelled by
    whether the target's y reaches theta.
    """
    n = len(traj)
    w, h, s = config.window_len, config.horizon, config.stride
    if n < w + h:
        raise DataError(f"trajectory of length {n} is too short for window {w} + horizon {h}")
    if criterion is not None and criterion.horizon != h:
        raise DataError(
            f"criterion horizon {criterion.horizon} does not match window horizon {h}"
        )
    count = (n - w - h) // s + 1
    states = traj.states
    starts = np.arange(count) * s
    # Windows flattened oldest-first: x0, y0, x1, y1, ...
    idx = starts[:, None] + np.arange(w)[None, :]
    inputs = states[idx].reshape(count, 2 * w)
    targets = states[starts + w - 1 + h]
    labels = None
    if criterion is not None:
        labels = (targets[:, 1] >= criterion.theta).astype(np.uint8)
    return WindowedDataset(inputs=inputs, targets=targets, event_labels=labels, config=config)


def chronological_split(ds: WindowedDataset, train_fraction: float = 0.8) -> SplitDataset:
    """First floor(train_fraction * M) samples train, the rest test. No shuffle."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    m = len(ds)
    n_train = int(train_fraction * m)
    if n_train < 1 or n_train >= m:
        raise DataError(f"split of {m} samples at fraction {train_fraction} leaves an empty side")
    return SplitDataset(
        train=ds.slice(0, n_train),
        test=ds.slice(n_train, m),
        split_fraction=train_fraction,
    )


def save_dataset_csv(ds: WindowedDataset, path) -> None:
    """Write ``idx,f0..f{2w-1},target_x,target_y[,label]`` with a config comment."""
    w = ds.config.window_len
    cols = [f"f{j}" for j in range(2 * w)]
    header = "idx," + ",".join(cols) + ",target_x,target_y"
    if ds.event_labels is not None:
        header += ",label"
    meta = {
        "window_len": ds.config.window_len,
        "horizon": ds.config.horizon,
        "stride": ds.config.stride,
    }
    lines = [f"# config: {dump_json(meta)}", header]
    for i in range(len(ds)):
        cells = [str(i)]
        cells.extend(fmt_float(v) for v in ds.inputs[i])
        cells.append(fmt_float(ds.targets[i, 0]))
        cells.append(fmt_float(ds.targets[i, 1]))
        if ds.event_labels is not None:
            cells.append(str(int(ds.event_labels[i])))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_dataset_csv(path) -> WindowedDataset:
    """Read a dataset written by save_dataset_csv; malformed rows name their line."""
    try:
        header, rows, meta = read_csv_rows(path)
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: {e}") from e
    base = ["idx"]
    feature_cols = [c for c in header if c.startswith("f") and c[1:].isdigit()]
    w2 = len(feature_cols)
    has_label = header and header[-1] == "label"
    expected = base + [f"f{j}" for j in range(w2)] + ["target_x", "target_y"]
    if has_label:
        expected.append("label")
    if header != expected or w2 == 0 or w2 % 2 != 0:
        raise DataError(f"{path}: unexpected header {header!r}")
    cfg_meta = meta.get("config", {}) if isinstance(meta.get("config", {}), dict) else {}
    config = WindowConfig(
        window_len=int(cfg_meta.get("window_len", w2 // 2)),
        horizon=int(cfg_meta.get("horizon", 1)),
        stride=int(cfg_meta.get("stride", 1)),
    )
    if config.window_len * 2 != w2:
        raise DataError(f"{path}: config window_len {config.window_len} does not match {w2} feature columns")
    m = len(rows)
    if m == 0:
        raise DataError(f"{path}: no data rows")
    inputs = np.empty((m, w2), dtype=np.float64)
    targets = np.empty((m, 2), dtype=np.float64)
    labels = np.empty(m, dtype=np.uint8) if has_label else None
    for i, (lineno, cells) in enumerate(rows):
        try:
            inputs[i] = [float(c) for c in cells[1 : 1 + w2]]
            targets[i, 0] = float(cells[1 + w2])
            targets[i, 1] = float(cells[2 + w2])
            if has_label:
                lab = int(cells[3 + w2])
                if lab not in (0, 1):
                    raise ValueError(f"label {lab} is not 0/1")
                labels[i] = lab
        except ValueError as e:
            raise DataError(f"{path} line {lineno}: {e}") from e
    return WindowedDataset(inputs=inputs, targets=targets, event_labels=labels, config=config)
