"""Metric and aggregation tests with hand-computed expectations."""
import numpy as np
import pytest

from chaosbench.dataset import WindowConfig, WindowedDataset
from chaosbench.errors import DataError
from chaosbench.evaluation import (
    AGGREGATE_HEADER,
    REPORT_HEADER,
    AggregateRow,
    EvalReport,
    aggregate_seeds,
    evaluate,
    evaluate_event_accuracy,
    evaluate_regression,
    load_reports_csv,
    report_row,
    save_aggregate_csv,
    save_reports_csv,
)
from chaosbench.map_dynamics import CriterionConfig


class _FixedModel:
    """Stub that returns canned predictions regardless of input."""

    kind = "fnn"
    profile = "A"

    def __init__(self, output):
        self.output = np.asarray(output, dtype=np.float64)

    def predict(self, x):
        return self.output[: x.shape[0]]


def _dataset(targets, labels=None, horizon=1):
    targets = np.asarray(targets, dtype=np.float64)
    m = targets.shape[0]
    return WindowedDataset(
        inputs=np.zeros((m, 2)),
        targets=targets,
        event_labels=None if labels is None else np.asarray(labels, dtype=np.uint8),
        config=WindowConfig(1, horizon, 1),
    )


def test_evaluate_regression_hand_case():
    model = _FixedModel([[1.0, 0.0], [0.0, 2.0]])
    test = _dataset([[0.0, 0.0], [0.0, 0.0]])
    report = evaluate_regression(model, test)
    assert report.test_mse_both == (1 + 0 + 0 + 4) / 4
    assert report.test_mse_x == (1 + 0) / 2
    assert report.model_kind == "fnn"
    assert report.profile == "A"
    assert report.horizon == 1
    assert report.event_accuracy is None


def test_evaluate_regression_empty_raises():
    with pytest.raises(DataError):
        evaluate_regression(_FixedModel([[0.0, 0.0]]), _dataset(np.zeros((0, 2))))


def test_event_accuracy_hand_case():
    # predicted y: 0.4, 0.1, 0.31, 0.3 -> predicted labels 1, 0, 1, 1
    model = _FixedModel([[0.0, 0.4], [0.0, 0.1], [0.0, 0.31], [0.0, 0.3]])
    test = _dataset(np.zeros((4, 2)), labels=[1, 0, 0, 1])
    acc, base = evaluate_event_accuracy(model, test, CriterionConfig(theta=0.3, horizon=1))
    assert acc == 0.75  # third sample is the only miss
    assert base == 0.5
    skewed = _dataset(np.zeros((4, 2)), labels=[1, 1, 1, 0])
    acc2, base2 = evaluate_event_accuracy(model, skewed, CriterionConfig(theta=0.3, horizon=1))
    assert acc2 == 0.5
    assert base2 == 0.75


def test_event_accuracy_requires_labels_and_matching_horizon():
    model = _FixedModel(np.zeros((3, 2)))
    with pytest.raises(DataError, match="labels"):
        evaluate_event_accuracy(model, _dataset(np.zeros((3, 2))), CriterionConfig(horizon=1))
    labelled = _dataset(np.zeros((3, 2)), labels=[0, 1, 0], horizon=2)
    with pytest.raises(DataError, match="horizon"):
        evaluate_event_accuracy(model, labelled, CriterionConfig(horizon=1))


def test_evaluate_combines_metrics():
    model = _FixedModel([[0.1, 0.4], [0.2, 0.1]])
    test = _dataset([[0.1, 0.5], [0.2, 0.0]], labels=[1, 0])
    report = evaluate(model, test, CriterionConfig(theta=0.3, horizon=1))
    assert report.event_accuracy == 1.0
    assert report.event_base_rate == 0.5
    assert report.test_mse_x == 0.0
    plain = evaluate(model, test)
    assert plain.event_accuracy is None


def test_aggregate_seeds_mean_and_population_std():
    def rep(kind, seed, mse, acc=None):
        return EvalReport(
            model_kind=kind,
            profile="A",
            sample_size=1000,
            horizon=1,
            seed=seed,
            test_mse_both=mse,
            test_mse_x=mse / 2,
            event_accuracy=acc,
            event_base_rate=None if acc is None else 0.6,
        )

    rows = aggregate_seeds(
        [
            rep("fnn", 0, 2.0, acc=0.9),
            rep("fnn", 1, 4.0, acc=0.7),
            rep("lstm", 0, 1.0),
        ]
    )
    by_key = {(r.model_kind, r.metric): r for r in rows}
    both = by_key[("fnn", "test_mse_both")]
    assert both.mean == 3.0
    assert both.std == 1.0  # population std of {2, 4}
    assert both.n_seeds == 2
    acc = by_key[("fnn", "event_accuracy")]
    assert acc.mean == pytest.approx(0.8)
    # lstm group lacks accuracy values, so no accuracy row for it
    assert ("lstm", "event_accuracy") not in by_key
    assert ("lstm", "test_mse_both") in by_key
    # first-appearance group order is preserved
    assert rows[0].model_kind == "fnn"


def test_report_row_formats_optionals():
    full = EvalReport("lstm", "B", 5000, 3, 42, 0.25, 0.125, 0.9, 0.6)
    assert report_row(full) == "lstm,B,5000,3,42,0.25,0.125,0.9,0.6"
    sparse = EvalReport("svr", "-", None, 1, None, 0.5, 1.0)
    assert report_row(sparse) == "svr,-,,1,,0.5,1.0,,"


def test_reports_csv_roundtrip(tmp_path):
    reports = [
        EvalReport("fnn", "A", 2000, 1, 7, 1.5e-05, 3e-05, 0.95, 0.8),
        EvalReport("rf", "-", 2000, 1, None, 0.125, 0.25),
    ]
    path = tmp_path / "reports.csv"
    save_reports_csv(reports, path, meta_comment='{"k":1}')
    text = path.read_text()
    assert text.startswith('# config: {"k":1}\n' + REPORT_HEADER)
    assert load_reports_csv(path) == reports


def test_load_reports_rejects_malformed(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("model,wrong\n")
    with pytest.raises(DataError, match="header"):
        load_reports_csv(path)
    path.write_text(REPORT_HEADER + "\nfnn,A,100,1,0,notafloat,0.1,,\n")
    with pytest.raises(DataError, match="line 2"):
        load_reports_csv(path)
    with pytest.raises(DataError):
        load_reports_csv(tmp_path / "missing.csv")


def test_aggregate_csv_layout(tmp_path):
    rows = [
        AggregateRow("fnn", "A", 1000, 1, "test_mse_both", 0.5, 0.1, 3),
        AggregateRow("fnn", "A", None, 2, "event_accuracy", 0.9, 0.0, 2),
    ]
    path = tmp_path / "agg.csv"
    save_aggregate_csv(rows, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == AGGREGATE_HEADER
    assert lines[1] == "fnn,A,1000,1,test_mse_both,0.5,0.1,3"
    assert lines[2] == "fnn,A,,2,event_accuracy,0.9,0.0,2"
