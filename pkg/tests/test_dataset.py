"""Windowing pipeline tests: counts and contents vs brute-force enumeration."""
import numpy as np
import pytest

from chaosbench.dataset import (
    WindowConfig,
    WindowedDataset,
    build_windows,
    chronological_split,
    load_dataset_csv,
    save_dataset_csv,
    trim_transient,
)
from chaosbench.errors import DataError
from chaosbench.map_dynamics import (
    CriterionConfig,
    MapParams,
    State,
    Trajectory,
    iterate,
    label_extreme_events,
    step,
)


def _enumerate_windows(states, w, h, s):
    """Brute-force reference: every window whose target still exists."""
    n = states.shape[0]
    out = []
    k = 0
    while k * s + w - 1 + h <= n - 1:
        start = k * s
        flat = []
        for j in range(start, start + w):
            flat.extend((states[j, 0], states[j, 1]))
        out.append((flat, states[start + w - 1 + h]))
        k += 1
    return out


def test_window_count_matches_enumeration(henon_traj):
    for n in (2, 3, 7, 20, 50):
        states = henon_traj.states[:n]
        traj = Trajectory(states=states, params=henon_traj.params, initial=henon_traj.initial)
        for w in (1, 2, 5):
            for h in (1, 4, 10):
                for s in (1, 2, 3):
                    ref = _enumerate_windows(states, w, h, s)
                    cfg = WindowConfig(window_len=w, horizon=h, stride=s)
                    if n < w + h:
                        with pytest.raises(DataError):
                            build_windows(traj, cfg)
                        continue
                    ds = build_windows(traj, cfg)
                    assert len(ds) == len(ref) == (n - w - h) // s + 1
                    assert ds.inputs.shape == (len(ref), 2 * w)
                    assert ds.targets.shape == (len(ref), 2)


def test_window_contents_match_enumeration(henon_traj):
    states = henon_traj.states[:40]
    traj = Trajectory(states=states, params=henon_traj.params, initial=henon_traj.initial)
    cfg = WindowConfig(window_len=3, horizon=2, stride=2)
    ds = build_windows(traj, cfg)
    ref = _enumerate_windows(states, 3, 2, 2)
    for i, (flat, target) in enumerate(ref):
        assert ds.inputs[i].tolist() == flat
        assert ds.targets[i].tolist() == target.tolist()


def test_windows_are_interleaved_oldest_first(henon_traj):
    ds = build_windows(henon_traj, WindowConfig(window_len=2, horizon=1))
    # f0,f1 is the older state, f2,f3 the newer one
    assert ds.inputs[0, 0] == henon_traj.states[0, 0]
    assert ds.inputs[0, 1] == henon_traj.states[0, 1]
    assert ds.inputs[0, 2] == henon_traj.states[1, 0]
    assert ds.inputs[0, 3] == henon_traj.states[1, 1]
    assert ds.targets[0].tolist() == henon_traj.states[2].tolist()


def test_window_config_validation():
    for bad in (dict(window_len=0), dict(horizon=0), dict(stride=0)):
        with pytest.raises(ValueError):
            WindowConfig(**bad)


def test_labels_align_with_event_criterion(henon_traj):
    crit = CriterionConfig(theta=0.3, horizon=3)
    cfg = WindowConfig(window_len=4, horizon=3, stride=2)
    ds = build_windows(henon_traj, cfg, criterion=crit)
    full = label_extreme_events(henon_traj, crit)
    for k in range(len(ds)):
        end = k * 2 + 4 - 1
        assert ds.event_labels[k] == full[end]
    assert set(np.unique(ds.event_labels)) <= {0, 1}


def test_criterion_horizon_mismatch_raises(henon_traj):
    with pytest.raises(DataError):
        build_windows(
            henon_traj,
            WindowConfig(window_len=1, horizon=2),
            criterion=CriterionConfig(horizon=3),
        )


def test_trim_transient_keeps_final_block():
    traj = iterate(State(0.1, 0.1), 10, MapParams())
    trimmed = trim_transient(traj, 0.3)
    assert len(trimmed) == 3
    assert np.array_equal(trimmed.states, traj.states[7:])
    # initial is the state right before the kept block
    assert (trimmed.initial.x, trimmed.initial.y) == (traj.states[6, 0], traj.states[6, 1])
    nxt = step(trimmed.initial, trimmed.params)
    assert (nxt.x, nxt.y) == (trimmed.states[0, 0], trimmed.states[0, 1])


def test_trim_transient_default_keeps_fifth(henon_traj):
    trimmed = trim_transient(henon_traj)
    assert len(trimmed) == 600
    assert np.array_equal(trimmed.states, henon_traj.states[2400:])


def test_trim_transient_full_keep_is_identity(henon_traj):
    assert trim_transient(henon_traj, 1.0) is henon_traj


def test_trim_transient_validation():
    traj = iterate(State(0.1, 0.1), 10, MapParams())
    with pytest.raises(ValueError):
        trim_transient(traj, 0.0)
    with pytest.raises(ValueError):
        trim_transient(traj, 1.5)
    with pytest.raises(DataError):
        trim_transient(traj, 0.05)


def test_chronological_split_sizes_and_order(henon_traj):
    ds = build_windows(henon_traj, WindowConfig())
    split = chronological_split(ds, 0.8)
    m = len(ds)
    assert len(split.train) == int(0.8 * m)
    assert len(split.test) == m - int(0.8 * m)
    assert np.array_equal(np.vstack([split.train.inputs, split.test.inputs]), ds.inputs)
    assert np.array_equal(np.vstack([split.train.targets, split.test.targets]), ds.targets)
    assert split.split_fraction == 0.8


def test_chronological_split_carries_labels(henon_traj):
    crit = CriterionConfig(horizon=1)
    ds = build_windows(henon_traj, WindowConfig(), criterion=crit)
    split = chronological_split(ds, 0.75)
    n_train = int(0.75 * len(ds))
    assert np.array_equal(split.train.event_labels, ds.event_labels[:n_train])
    assert np.array_equal(split.test.event_labels, ds.event_labels[n_train:])


def test_chronological_split_validation(henon_traj):
    ds = build_windows(henon_traj, WindowConfig())
    with pytest.raises(ValueError):
        chronological_split(ds, 0.0)
    with pytest.raises(ValueError):
        chronological_split(ds, 1.0)
    tiny = ds.slice(0, 2)
    with pytest.raises(DataError):
        chronological_split(tiny, 0.1)


def test_dataset_csv_roundtrip_exact(tmp_path, henon_traj):
    crit = CriterionConfig(theta=0.3, horizon=2)
    ds = build_windows(henon_traj, WindowConfig(window_len=2, horizon=2), criterion=crit)
    ds = ds.slice(0, 25)
    path = tmp_path / "ds.csv"
    save_dataset_csv(ds, path)
    back = load_dataset_csv(path)
    assert np.array_equal(back.inputs, ds.inputs)
    assert np.array_equal(back.targets, ds.targets)
    assert np.array_equal(back.event_labels, ds.event_labels)
    assert back.config == ds.config


def test_dataset_csv_roundtrip_without_labels(tmp_path, henon_traj):
    ds = build_windows(henon_traj, WindowConfig(window_len=1, horizon=1)).slice(0, 10)
    path = tmp_path / "ds.csv"
    save_dataset_csv(ds, path)
    back = load_dataset_csv(path)
    assert back.event_labels is None
    assert np.array_equal(back.inputs, ds.inputs)
    assert back.config == WindowConfig(1, 1, 1)


def test_load_dataset_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_dataset_csv(tmp_path / "absent.csv")


def test_load_dataset_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(DataError, match="header"):
        load_dataset_csv(path)


def test_load_dataset_malformed_rows_name_their_line(tmp_path):
    good = "# config: {\"horizon\":1,\"stride\":1,\"window_len\":1}\nidx,f0,f1,target_x,target_y,label\n"
    path = tmp_path / "rows.csv"

    path.write_text(good + "0,0.1,0.2,0.3,0.4,1\n1,0.1,oops,0.3,0.4,0\n")
    with pytest.raises(DataError, match="line 4"):
        load_dataset_csv(path)

    path.write_text(good + "0,0.1,0.2,0.3,0.4,2\n")
    with pytest.raises(DataError, match="not 0/1"):
        load_dataset_csv(path)

    path.write_text(good + "0,0.1,0.2,0.3\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset_csv(path)

    path.write_text(good)
    with pytest.raises(DataError, match="no data rows"):
        load_dataset_csv(path)


def test_slice_returns_aligned_view(henon_traj):
    ds = build_windows(henon_traj, WindowConfig(), criterion=CriterionConfig(horizon=1))
    part = ds.slice(5, 12)
    assert len(part) == 7
    assert np.array_equal(part.inputs, ds.inputs[5:12])
    assert np.array_equal(part.targets, ds.targets[5:12])
    assert np.array_equal(part.event_labels, ds.event_labels[5:12])
    assert part.config == ds.config


def test_windowed_dataset_direct_construction():
    cfg = WindowConfig(2, 1, 1)
    ds = WindowedDataset(
        inputs=np.zeros((4, 4)), targets=np.zeros((4, 2)), event_labels=None, config=cfg
    )
    assert len(ds) == 4
