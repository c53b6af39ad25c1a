"""Mini-batch training with Adam, plus checkpoint and log serialization.

The loop is deterministic end to end: shuffles come from the portable
seeded generator, batches keep their drawn order (the final short batch is
trained, not dropped), and a given (seed, config, dataset) triple therefore
reproduces parameters bit for bit. Classical models have no epoch loop;
fit() dispatches to their own fitting routine and records a single log row.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import SplitDataset
from .errors import DataError, NumericError, ShapeError
from .io_utils import atomic_write_text, dump_json, fmt_float
from .models_classical import ForestModel, SvrModel
from .models_neural import FnnModel, LstmModel, RnnModel, mse_and_grad
from .numerics import Rng, derive_seed

CHECKPOINT_MAGIC = "CHAOSBENCH-CKPT-1"

NEURAL_KINDS = ("fnn", "rnn", "lstm")
CLASSICAL_KINDS = ("rf", "svr")
MODEL_KINDS = NEURAL_KINDS + CLASSICAL_KINDS


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "seed": self.seed,
        }


@dataclass
class AdamState:
    """First/second moment accumulators and the shared step counter."""

    m: dict
    v: dict
    t: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_step(params: dict, grads: dict, state: AdamState, cfg: TrainConfig) -> None:
    """One Adam update, in place, with bias-corrected moments."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    for k in params:
        g = grads[k]
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * (g * g)
        m_hat = state.m[k] / corr1
        v_hat = state.v[k] / corr2
        params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error over every entry of the batch."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return mse_and_grad(pred, target)[0]


@dataclass
class TrainLog:
    """Per-epoch training losses and timings plus the final held-out MSE.

    Losses and final parameters are deterministic under (seed, config,
    dataset); the wall-clock column is measurement, not contract.
    """

    train_losses: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    final_test_mse: float = float("nan")


def fit(model, split: SplitDataset, cfg: TrainConfig = TrainConfig()) -> TrainLog:
    """Train a model on the split's train block; score MSE on its test block.

    Neural models run cfg.epochs of shuffled mini-batches with Adam; the
    recorded epoch loss is the sample-weighted mean of batch losses (each
    measured before its update). Classical models ignore the epoch
    machinery and fit in one shot with seed derive_seed(cfg.seed, 1), the
    same stream position the shuffler would own.
    """
    log = TrainLog()
    if model.kind in CLASSICAL_KINDS:
        t0 = time.perf_counter()
        model.fit(split.train, seed=derive_seed(cfg.seed, 1))
        log.epoch_seconds.append(time.perf_counter() - t0)
        log.train_losses.append(mse_loss(model.predict(split.train.inputs), split.train.targets))
        log.final_test_mse = mse_loss(model.predict(split.test.inputs), split.test.targets)
        return log
    if model.kind not in NEURAL_KINDS:
        raise ValueError(f"unknown model kind {model.kind!r}")

    x = split.train.inputs
    y = split.train.targets
    m = x.shape[0]
    if m < 1:
        raise DataError("cannot train on an empty dataset")
    state = AdamState.for_params(model.params)
    rng = Rng(derive_seed(cfg.seed, 1))
    order = list(range(m))
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        rng.shuffle(order)
        idx = np.asarray(order)
        sq_sum = 0.0
        for start in range(0, m, cfg.batch_size):
            batch = idx[start : start + cfg.batch_size]
            # Overflow in a doomed batch is reported via the loss check, not
            # as a numpy warning.
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = model.backward(x[batch], y[batch])
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss in epoch {epoch + 1}")
            adam_step(model.params, grads, state, cfg)
            sq_sum += loss * batch.size
        log.train_losses.append(sq_sum / m)
        log.epoch_seconds.append(time.perf_counter() - t0)
    log.final_test_mse = mse_loss(model.predict(split.test.inputs), split.test.targets)
    return log


def save_train_log_csv(log: TrainLog, path) -> None:
    """Write ``epoch,train_mse,seconds`` rows, epoch counting from 1."""
    lines = ["epoch,train_mse,seconds"]
    for i, (loss, secs) in enumerate(zip(log.train_losses, log.epoch_seconds)):
        lines.append(f"{i + 1},{fmt_float(loss)},{fmt_float(secs)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


_MODEL_CLASSES = {
    "fnn": FnnModel,
    "rnn": RnnModel,
    "lstm": LstmModel,
    "rf": ForestModel,
    "svr": SvrModel,
}


def make_model(
    kind: str,
    window_len: int = 1,
    profile: str = "A",
    seed: int = 0,
    output_activation: str = "linear",
    map_b: float = 0.3,
):
    """Build an untrained model of the named kind with its default shape.

    Neural weights draw from Rng(derive_seed(seed, 0)); derive_seed(seed, 1)
    is reserved for the training-time shuffle or classical fitting, so one
    seed pins down the whole run.
    """
    if kind == "fnn":
        return FnnModel(2 * window_len, rng=Rng(derive_seed(seed, 0)), output_activation=output_activation)
    if kind == "rnn":
        return RnnModel.from_profile(profile, rng=Rng(derive_seed(seed, 0)))
    if kind == "lstm":
        return LstmModel.from_profile(profile, rng=Rng(derive_seed(seed, 0)))
    if kind == "rf":
        return ForestModel()
    if kind == "svr":
        return SvrModel(map_b=map_b)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def save_checkpoint(path, model, cfg: TrainConfig | None = None) -> None:
    """Serialize any model kind to versioned, deterministic JSON."""
    if model.kind not in _MODEL_CLASSES:
        raise ValueError(f"unknown model kind {model.kind!r}")
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "kind": model.kind,
        "model": model.to_dict(),
    }
    if cfg is not None:
        payload["train_config"] = cfg.to_dict()
    atomic_write_text(path, dump_json(payload) + "\n")


def load_checkpoint(path):
    """Load a checkpoint; returns (model, train_config_dict_or_None)."""
    import json

    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: unreadable checkpoint ({e})") from e
    if not isinstance(payload, dict) or payload.get("magic") != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: missing checkpoint magic {CHECKPOINT_MAGIC!r}")
    kind = payload.get("kind")
    if kind not in _MODEL_CLASSES:
        raise DataError(f"{path}: unknown model kind {kind!r}")
    model = _MODEL_CLASSES[kind].from_dict(payload["model"])
    return model, payload.get("train_config")
