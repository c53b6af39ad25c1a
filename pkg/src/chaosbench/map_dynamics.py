"""Henon map simulation and threshold-event labelling.

The map sends (x, y) to (1 - a*x^2 + y, b*x). With the classical parameters
a = 1.4, b = 0.3 orbits settle onto the strange attractor; the Jacobian
determinant is -b everywhere, so the map contracts area at a constant rate.

A state is labelled an upcoming event when the y coordinate, looked up
``horizon`` steps later on the same orbit, reaches the threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, DivergenceError
from .io_utils import atomic_write_text, fmt_float

# Any orbit that leaves this box is numerically gone; the attractor itself
# lives within |x| < 1.3, |y| < 0.4.
DIVERGENCE_LIMIT = 1e10


@dataclass(frozen=True)
class MapParams:
    """Henon map coefficients."""

    a: float = 1.4
    b: float = 0.3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("map parameters must be finite")


@dataclass(frozen=True)
class State:
    x: float
    y: float


@dataclass(frozen=True)
class CriterionConfig:
    """Event rule: state n is positive iff y at step n + horizon >= theta."""

    theta: float = 0.3
    horizon: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"criterion horizon must be >= 1, got {self.horizon}")
        if not math.isfinite(self.theta):
            raise ValueError("criterion theta must be finite")


@dataclass(frozen=True)
class Trajectory:
    """An orbit: states[k] is the (k+1)-th image of ``initial`` under the map.

    ``states`` is a read-only (n, 2) float64 array with columns x, y.
    ``initial`` is the state one step before states[0], so the stepping
    invariant survives slicing done by trim_transient.
    """

    states: np.ndarray
    params: MapParams
    initial: State

    def __len__(self) -> int:
        return self.states.shape[0]


def step(state: State, params: MapParams = MapParams()) -> State:
    """One application of the map."""
    nx = 1.0 - params.a * state.x * state.x + state.y
    ny = params.b * state.x
    if not (math.isfinite(nx) and math.isfinite(ny)):
        raise DivergenceError(f"map step produced a non-finite state from ({state.x}, {state.y})")
    return State(nx, ny)


def iterate(initial: State, n_steps: int, params: MapParams = MapParams()) -> Trajectory:
    """Orbit of n_steps states starting one step after ``initial``."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    x = float(initial.x)
    y = float(initial.y)
    if not (abs(x) <= DIVERGENCE_LIMIT and abs(y) <= DIVERGENCE_LIMIT):
        raise DivergenceError(f"initial state ({x}, {y}) is outside the bounded region")
    a = params.a
    b = params.b
    out = np.empty((n_steps, 2), dtype=np.float64)
    for k in range(n_steps):
        x, y = 1.0 - a * x * x + y, b * x
        # abs(nan) <= limit is False, so this also catches non-finite states.
        if not (abs(x) <= DIVERGENCE_LIMIT and abs(y) <= DIVERGENCE_LIMIT):
            raise DivergenceError(f"orbit diverged at step {k + 1} of {n_steps}")
        out[k, 0] = x
        out[k, 1] = y
    out.flags.writeable = False
    return Trajectory(states=out, params=params, initial=State(float(initial.x), float(initial.y)))


def jacobian_determinant(state: State, params: MapParams = MapParams()) -> float:
    """det J = -b at every state: the Jacobian is [[-2ax, 1], [b, 0]]."""
    return -params.b


def label_extreme_events(traj: Trajectory, criterion: CriterionConfig) -> np.ndarray:
    """Event labels for the first len(traj) - horizon states.

    labels[n] = 1 iff traj.states[n + horizon].y >= theta. States too close
    to the end of the orbit have no lookahead and get no label.
    """
    t = criterion.horizon
    if len(traj) <= t:
        raise DataError(f"trajectory of length {len(traj)} is too short for horizon {t}")
    return (traj.states[t:, 1] >= criterion.theta).astype(np.uint8)


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the orbit as ``n,x,y`` rows, n counting from 1."""
    lines = ["n,x,y"]
    for i in range(len(traj)):
        lines.append(f"{i + 1},{fmt_float(traj.states[i, 0])},{fmt_float(traj.states[i, 1])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_labels_csv(traj: Trajectory, horizons: Sequence[int], theta: float, path) -> None:
    """Write ``n,x,y,label_T{h}...`` rows for every requested horizon.

    Only states with a defined label under every horizon are written, so the
    row count is len(traj) - max(horizons).
    """
    horizons = list(horizons)
    if not horizons:
        raise ValueError("at least one horizon is required")
    labels = {
        h: label_extreme_events(traj, CriterionConfig(theta=theta, horizon=h)) for h in horizons
    }
    n_rows = len(traj) - max(horizons)
    header = "n,x,y," + ",".join(f"label_T{h}" for h in horizons)
    lines = [header]
    for i in range(n_rows):
        cells = [str(i + 1), fmt_float(traj.states[i, 0]), fmt_float(traj.states[i, 1])]
        cells.extend(str(int(labels[h][i])) for h in horizons)
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
