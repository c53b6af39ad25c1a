"""Shared fixtures: one mid-sized orbit reused across test modules."""
import pytest

from chaosbench.map_dynamics import MapParams, State, iterate


@pytest.fixture(scope="session")
def henon_traj():
    """3000-step orbit from the standard seed state (0.1, 0.1)."""
    return iterate(State(0.1, 0.1), 3000, MapParams())
