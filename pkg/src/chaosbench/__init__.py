"""Forecasting benchmark on the Henon map.

Simulates the map, windows orbits into supervised datasets, trains five
from-scratch model families (feedforward, simple recurrent, LSTM, random
forest, linear SVR), and reproduces the benchmark's experiment grids with
fully deterministic seeding.
"""

from .dataset import (
    SplitDataset,
    WindowConfig,
    WindowedDataset,
    build_windows,
    chronological_split,
    trim_transient,
)
from .errors import (
    ChaosBenchError,
    DataError,
    DivergenceError,
    GridError,
    NumericError,
    ShapeError,
)
from .evaluation import EvalReport, aggregate_seeds, evaluate, evaluate_event_accuracy, evaluate_regression
from .map_dynamics import (
    CriterionConfig,
    MapParams,
    State,
    Trajectory,
    iterate,
    jacobian_determinant,
    label_extreme_events,
    step,
)
from .models_classical import ForestModel, SvrModel
from .models_neural import FnnModel, LstmModel, RnnModel
from .numerics import Rng, derive_seed, glorot_uniform, grad_check, matmul
from .training import TrainConfig, TrainLog, fit, load_checkpoint, make_model, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "ChaosBenchError",
    "CriterionConfig",
    "DataError",
    "DivergenceError",
    "EvalReport",
    "FnnModel",
    "ForestModel",
    "GridError",
    "LstmModel",
    "MapParams",
    "NumericError",
    "Rng",
    "RnnModel",
    "ShapeError",
    "SplitDataset",
    "State",
    "SvrModel",
    "TrainConfig",
    "TrainLog",
    "Trajectory",
    "WindowConfig",
    "WindowedDataset",
    "aggregate_seeds",
    "build_windows",
    "chronological_split",
    "derive_seed",
    "evaluate",
    "evaluate_event_accuracy",
    "evaluate_regression",
    "fit",
    "glorot_uniform",
    "grad_check",
    "iterate",
    "jacobian_determinant",
    "label_extreme_events",
    "load_checkpoint",
    "make_model",
    "matmul",
    "save_checkpoint",
    "step",
    "trim_transient",
]
