"""Held-out metrics and cross-seed aggregation.

Regression quality is MSE on the test block (both coordinates, and x
alone). Event skill thresholds the predicted y at the horizon against
theta and compares with the stored labels; the base rate is the
majority-class frequency, so a useful model must beat it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import WindowedDataset
from .errors import DataError
from .io_utils import atomic_write_text, fmt_float, read_csv_rows
from .map_dynamics import CriterionConfig
from .training import mse_loss


@dataclass(frozen=True)
class EvalReport:
    """One trained model's scores plus the grid keys that produced it."""

    model_kind: str
    profile: str
    sample_size: int | None
    horizon: int
    seed: int | None
    test_mse_both: float
    test_mse_x: float
    event_accuracy: float | None = None
    event_base_rate: float | None = None

    def with_keys(self, sample_size: int | None = None, seed: int | None = None) -> "EvalReport":
        return replace(self, sample_size=sample_size, seed=seed)


@dataclass(frozen=True)
class AggregateRow:
    model_kind: str
    profile: str
    sample_size: int | None
    horizon: int
    metric: str
    mean: float
    std: float
    n_seeds: int


def evaluate_regression(model, test: WindowedDataset) -> EvalReport:
    """Score a trained model on a held-out block."""
    if len(test) < 1:
        raise DataError("cannot evaluate on an empty dataset")
    pred = model.predict(test.inputs)
    both = mse_loss(pred, test.targets)
    diff_x = pred[:, 0] - test.targets[:, 0]
    return EvalReport(
        model_kind=model.kind,
        profile=model.profile,
        sample_size=None,
        horizon=test.config.horizon,
        seed=None,
        test_mse_both=both,
        test_mse_x=float(np.mean(diff_x * diff_x)),
    )


def evaluate_event_accuracy(model, test: WindowedDataset, criterion: CriterionConfig) -> tuple[float, float]:
    """(accuracy, base_rate) of thresholded y-predictions against stored labels.

    The model predicts the state at the dataset's horizon; the predicted
    label is 1 iff that y reaches theta. base_rate is the frequency of the
    majority class, always in [0.5, 1].
    """
    if test.event_labels is None:
        raise DataError("dataset has no event labels; build it with a criterion")
    if test.config.horizon != criterion.horizon:
        raise DataError(
            f"criterion horizon {criterion.horizon} does not match dataset horizon {test.config.horizon}"
        )
    if len(test) < 1:
        raise DataError("cannot evaluate on an empty dataset")
    pred = model.predict(test.inputs)
    predicted = (pred[:, 1] >= criterion.theta).astype(np.uint8)
    truth = test.event_labels
    accuracy = float(np.mean(predicted == truth))
    positive = float(np.mean(truth))
    return accuracy, max(positive, 1.0 - positive)


def evaluate(model, test: WindowedDataset, criterion: CriterionConfig | None = None) -> EvalReport:
    """Full report: regression metrics, plus event skill when labels exist."""
    report = evaluate_regression(model, test)
    if criterion is not None and test.event_labels is not None:
        acc, base = evaluate_event_accuracy(model, test, criterion)
        report = replace(report, event_accuracy=acc, event_base_rate=base)
    return report


_METRICS = ("test_mse_both", "test_mse_x", "event_accuracy")


def aggregate_seeds(reports: list[EvalReport]) -> list[AggregateRow]:
    """Mean and population std per metric across seeds.

    Groups by (model_kind, profile, sample_size, horizon) preserving first
    appearance order; event_accuracy rows appear only for groups where
    every report carries it.
    """
    groups: dict = {}
    for r in reports:
        key = (r.model_kind, r.profile, r.sample_size, r.horizon)
        groups.setdefault(key, []).append(r)
    rows = []
    for key, members in groups.items():
        for metric in _METRICS:
            values = [getattr(r, metric) for r in members]
            if any(v is None for v in values):
                continue
            arr = np.asarray(values, dtype=np.float64)
            rows.append(
                AggregateRow(
                    model_kind=key[0],
                    profile=key[1],
                    sample_size=key[2],
                    horizon=key[3],
                    metric=metric,
                    mean=float(arr.mean()),
                    std=float(arr.std()),
                    n_seeds=len(members),
                )
            )
    return rows


REPORT_HEADER = "model,profile,samples,horizon,seed,mse_both,mse_x,event_acc,base_rate"


def report_row(r: EvalReport) -> str:
    cells = [
        r.model_kind,
        r.profile,
        "" if r.sample_size is None else str(r.sample_size),
        str(r.horizon),
        "" if r.seed is None else str(r.seed),
        fmt_float(r.test_mse_both),
        fmt_float(r.test_mse_x),
        "" if r.event_accuracy is None else fmt_float(r.event_accuracy),
        "" if r.event_base_rate is None else fmt_float(r.event_base_rate),
    ]
    return ",".join(cells)


def save_reports_csv(reports: list[EvalReport], path, meta_comment: str | None = None) -> None:
    lines = []
    if meta_comment is not None:
        lines.append(f"# config: {meta_comment}")
    lines.append(REPORT_HEADER)
    lines.extend(report_row(r) for r in reports)
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_reports_csv(path) -> list[EvalReport]:
    try:
        header, rows, _ = read_csv_rows(path)
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: {e}") from e
    expected = REPORT_HEADER.split(",")
    if header[: len(expected)] != expected:
        raise DataError(f"{path}: unexpected header {header!r}")
    out = []
    for lineno, cells in rows:
        try:
            out.append(
                EvalReport(
                    model_kind=cells[0],
                    profile=cells[1],
                    sample_size=int(cells[2]) if cells[2] else None,
                    horizon=int(cells[3]),
                    seed=int(cells[4]) if cells[4] else None,
                    test_mse_both=float(cells[5]),
                    test_mse_x=float(cells[6]),
                    event_accuracy=float(cells[7]) if cells[7] else None,
                    event_base_rate=float(cells[8]) if cells[8] else None,
                )
            )
        except (ValueError, IndexError) as e:
            raise DataError(f"{path} line {lineno}: {e}") from e
    return out


AGGREGATE_HEADER = "model,profile,samples,horizon,metric,mean,std,n_seeds"


def save_aggregate_csv(rows: list[AggregateRow], path, meta_comment: str | None = None) -> None:
    lines = []
    if meta_comment is not None:
        lines.append(f"# config: {meta_comment}")
    lines.append(AGGREGATE_HEADER)
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.model_kind,
                    r.profile,
                    "" if r.sample_size is None else str(r.sample_size),
                    str(r.horizon),
                    r.metric,
                    fmt_float(r.mean),
                    fmt_float(r.std),
                    str(r.n_seeds),
                ]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
