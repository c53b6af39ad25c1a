"""Classical forecasters built from first principles: a CART random forest
and a linear epsilon-insensitive support vector regressor.

The forest grows unpruned variance-reduction trees on bootstrap resamples
and averages their two-vector leaf means. The SVR fits only the x
coordinate (a linear function separates it well) and reconstructs y from
the map identity y_next = b * x_last, which is exact for one-step targets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import WindowedDataset
from .errors import DataError, ShapeError
from .numerics import Rng, derive_seed


@dataclass
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (value set)."""

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.value is not None


def _exact_split_score(x: np.ndarray, y: np.ndarray, feature: int, threshold: float) -> float:
    """Direct two-child SSE, the defining (slow) form of the split score."""
    mask = x[:, feature] <= threshold
    if mask.all() or not mask.any():
        return np.inf
    left = y[mask]
    right = y[~mask]
    return float(
        ((left - left.mean(axis=0)) ** 2).sum() + ((right - right.mean(axis=0)) ** 2).sum()
    )


def best_split(x: np.ndarray, y: np.ndarray) -> tuple[int, float] | None:
    """Exhaustive variance-reduction split search.

    Candidates are midpoints between consecutive sorted unique values of
    each feature; the score of a candidate is the summed within-child
    squared deviation from the child mean, totalled over both target
    columns. Ties break toward the lowest feature index, then the lowest
    threshold. Returns None when no feature admits a split.

    The cumulative-sum scan locates the near-minimal candidates quickly,
    but its cancellation noise (~eps * sum(y^2)) can scramble exact ties,
    so every candidate within that noise of the scanned minimum is
    rescored with the direct SSE before the tie rule is applied.
    """
    m = x.shape[0]
    best_score = np.inf
    best = None
    counts = np.arange(1, m, dtype=np.float64)
    eps = np.finfo(np.float64).eps
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        gap = xs[:-1] < xs[1:]
        if not gap.any():
            continue
        ys = y[order]
        csum = np.cumsum(ys, axis=0)
        csq = np.cumsum(ys * ys, axis=0)
        total = csum[-1]
        total_sq = csq[-1]
        n_left = counts
        n_right = m - n_left
        left_sse = (csq[:-1] - csum[:-1] ** 2 / n_left[:, None]).sum(axis=1)
        right_sse = ((total_sq - csq[:-1]) - (total - csum[:-1]) ** 2 / n_right[:, None]).sum(axis=1)
        score = np.where(gap, left_sse + right_sse, np.inf)
        tol = 64.0 * m * eps * (1.0 + float(total_sq.sum()))
        for pos in np.nonzero(score <= score.min() + tol)[0]:
            threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
            exact = _exact_split_score(x, y, j, threshold)
            if exact < best_score:
                best_score = exact
                best = (j, threshold)
    return best


def _build_tree(
    x: np.ndarray,
    y: np.ndarray,
    min_samples_split: int,
    max_depth: int | None,
    depth: int = 0,
) -> TreeNode:
    m = x.shape[0]
    if (
        m < min_samples_split
        or (max_depth is not None and depth >= max_depth)
        or (y == y[0]).all()
    ):
        return TreeNode(value=y.mean(axis=0))
    split = best_split(x, y)
    if split is None:
        return TreeNode(value=y.mean(axis=0))
    feature, threshold = split
    go_left = x[:, feature] <= threshold
    left = _build_tree(x[go_left], y[go_left], min_samples_split, max_depth, depth + 1)
    right = _build_tree(x[~go_left], y[~go_left], min_samples_split, max_depth, depth + 1)
    return TreeNode(feature=feature, threshold=threshold, left=left, right=right)


def _tree_predict(node: TreeNode, x: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] += node.value
        return
    mask = x[idx, node.feature] <= node.threshold
    if mask.any():
        _tree_predict(node.left, x, idx[mask], out)
    if not mask.all():
        _tree_predict(node.right, x, idx[~mask], out)


def _tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value.tolist()}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(d: dict) -> TreeNode:
    if "value" in d:
        return TreeNode(value=np.asarray(d["value"], dtype=np.float64))
    return TreeNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        left=_tree_from_dict(d["left"]),
        right=_tree_from_dict(d["right"]),
    )


class ForestModel:
    """Bagged ensemble of unpruned CART regression trees.

    Each tree sees a bootstrap resample of the training set (same size,
    drawn with replacement from a per-tree child seed) and grows until
    nodes are pure or hold fewer than min_samples_split samples.
    Prediction averages the trees' two-vector leaf means.
    """

    kind = "rf"
    profile = "-"

    def __init__(self, n_trees: int = 100, min_samples_split: int = 2, max_depth: int | None = None):
        if n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {n_trees}")
        if min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {min_samples_split}")
        self.n_trees = int(n_trees)
        self.min_samples_split = int(min_samples_split)
        self.max_depth = max_depth
        self.bootstrap_seed: int | None = None
        self.input_width: int | None = None
        self.trees: list[TreeNode] = []

    def fit(self, train: WindowedDataset, seed: int = 0) -> "ForestModel":
        x = np.asarray(train.inputs, dtype=np.float64)
        y = np.asarray(train.targets, dtype=np.float64)
        if len(train) < 1:
            raise DataError("cannot fit a forest on an empty dataset")
        self.bootstrap_seed = int(seed)
        self.input_width = x.shape[1]
        self.trees = []
        for t in range(self.n_trees):
            rng = Rng(derive_seed(seed, t))
            idx = rng.indices(x.shape[0], x.shape[0])
            self.trees.append(_build_tree(x[idx], y[idx], self.min_samples_split, self.max_depth))
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise DataError("forest has not been fitted")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise ShapeError(f"forest expects (batch, {self.input_width}) inputs, got shape {x.shape}")
        out = np.zeros((x.shape[0], 2))
        idx = np.arange(x.shape[0])
        for tree in self.trees:
            _tree_predict(tree, x, idx, out)
        return out / self.n_trees

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "min_samples_split": self.min_samples_split,
            "max_depth": self.max_depth,
            "bootstrap_seed": self.bootstrap_seed,
            "input_width": self.input_width,
            "trees": [_tree_to_dict(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        model = cls(d["n_trees"], d["min_samples_split"], d["max_depth"])
        model.bootstrap_seed = d["bootstrap_seed"]
        model.input_width = d["input_width"]
        model.trees = [_tree_from_dict(t) for t in d["trees"]]
        return model


class SvrModel:
    """Linear epsilon-insensitive SVR on the x coordinate.

    Minimises 0.5*||w||^2 + C * sum_i max(0, |w.x_i + b - t_i| - epsilon)
    by per-sample subgradient descent with the step schedule
    eta_k = eta0 / (1 + k / n_epochs) over epoch index k and a seeded
    shuffle each epoch, so a given seed reproduces the fit bit for bit.

    predict() emits a full (x, y) state: y is reconstructed analytically as
    map_b * x_last from the newest window entry, exact for one-step targets.
    Fitting therefore rejects datasets built with any other horizon.
    """

    kind = "svr"
    profile = "-"

    def __init__(
        self,
        epsilon: float = 0.1,
        c: float = 1.0,
        learning_rate: float = 0.01,
        n_epochs: int = 200,
        map_b: float = 0.3,
    ):
        if epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {epsilon}")
        if c <= 0 or learning_rate <= 0 or n_epochs < 1:
            raise ValueError("c and learning_rate must be positive, n_epochs >= 1")
        self.epsilon = float(epsilon)
        self.c = float(c)
        self.learning_rate = float(learning_rate)
        self.n_epochs = int(n_epochs)
        self.map_b = float(map_b)
        self.w: np.ndarray | None = None
        self.bias: float = 0.0
        self.objective_history: list[float] = []

    def _objective(self, x: np.ndarray, t: np.ndarray) -> float:
        resid = np.abs(x @ self.w + self.bias - t) - self.epsilon
        hinge = np.maximum(resid, 0.0).sum()
        return float(0.5 * self.w @ self.w + self.c * hinge)

    def fit(self, train: WindowedDataset, seed: int = 0) -> "SvrModel":
        if train.config.horizon != 1:
            raise DataError(
                f"svr reconstructs y analytically from one-step dynamics; "
                f"dataset horizon is {train.config.horizon}"
            )
        x = np.asarray(train.inputs, dtype=np.float64)
        t = np.asarray(train.targets[:, 0], dtype=np.float64)
        m = x.shape[0]
        if m < 1:
            raise DataError("cannot fit svr on an empty dataset")
        self.w = np.zeros(x.shape[1])
        self.bias = 0.0
        self.objective_history = []
        rng = Rng(derive_seed(seed, 0))
        order = list(range(m))
        for epoch in range(self.n_epochs):
            eta = self.learning_rate / (1.0 + epoch / self.n_epochs)
            rng.shuffle(order)
            w = self.w
            bias = self.bias
            for i in order:
                xi = x[i]
                err = xi @ w + bias - t[i]
                # Each sample carries 1/m of the ridge term so one epoch
                # walks the full objective once.
                gw = w / m
                if err > self.epsilon:
                    gw = gw + self.c * xi
                    bias -= eta * self.c
                elif err < -self.epsilon:
                    gw = gw - self.c * xi
                    bias += eta * self.c
                w = w - eta * gw
            self.w = w
            self.bias = bias
            self.objective_history.append(self._objective(x, t))
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        if self.w is None:
            raise DataError("svr has not been fitted")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.w.size:
            raise ShapeError(f"svr expects (batch, {self.w.size}) inputs, got shape {x.shape}")
        x_hat = x @ self.w + self.bias
        # Newest window entry is the (x, y) pair in the last two columns.
        y_hat = self.map_b * x[:, -2]
        return np.column_stack([x_hat, y_hat])

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c": self.c,
            "learning_rate": self.learning_rate,
            "n_epochs": self.n_epochs,
            "map_b": self.map_b,
            "w": None if self.w is None else self.w.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        model = cls(d["epsilon"], d["c"], d["learning_rate"], d["n_epochs"], d["map_b"])
        if d["w"] is not None:
            model.w = np.asarray(d["w"], dtype=np.float64)
        model.bias = float(d["bias"])
        return model
