"""Bagged CART regression trees with a probability mode for binary targets.

Trees are stored as flat node arrays so forests serialise to JSON and
prediction vectorises over rows.  Each tree derives its generator from
(master seed, tree index), so training is deterministic and could be
parallelised per tree without changing the model.
"""

from __future__ import annotations

import math

import numpy as np

from .datatable import DataTable

_LEAF = -1


class Tree:
    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat != _LEAF
            if not active.any():
                return self.value[node]
            rows = np.nonzero(active)[0]
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])


class _TreeBuilder:
    def __init__(self, X, y, rng, max_depth, min_leaf, n_split_features):
        self.X, self.y, self.rng = X, y, rng
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_split_features = n_split_features
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def build(self) -> Tree:
        self._grow(np.arange(self.X.shape[0]), depth=0)
        return Tree(self.feature, self.threshold, self.left, self.right, self.value)

    def _new_node(self, rows) -> int:
        idx = len(self.feature)
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(float(self.y[rows].mean()))
        return idx

    def _grow(self, rows: np.ndarray, depth: int) -> int:
        idx = self._new_node(rows)
        if depth >= self.max_depth or rows.size < 2 * self.min_leaf:
            return idx
        yv = self.y[rows]
        if yv.min() == yv.max():
            return idx
        split = self._best_split(rows)
        if split is None:
            return idx
        feat, thr = split
        mask = self.X[rows, feat] <= thr
        self.feature[idx] = feat
        self.threshold[idx] = thr
        self.left[idx] = self._grow(rows[mask], depth + 1)
        self.right[idx] = self._grow(rows[~mask], depth + 1)
        return idx

    def _best_split(self, rows: np.ndarray):
        """Lowest-SSE split over a random feature subset, via prefix sums."""
        n = rows.size
        candidates = self.rng.permutation(self.X.shape[1])[: self.n_split_features]
        best = None
        best_cost = np.inf
        for feat in candidates:
            x = self.X[rows, feat]
            order = np.argsort(x, kind="stable")
            xs = x[order]
            ys = self.y[rows][order]
            csum = np.cumsum(ys)
            csq = np.cumsum(ys * ys)
            k = np.arange(self.min_leaf, n - self.min_leaf + 1)
            if k.size == 0:
                continue
            valid = xs[k - 1] < xs[k]  # no split between equal values
            if not valid.any():
                continue
            k = k[valid]
            left_cost = csq[k - 1] - csum[k - 1] ** 2 / k
            right_cost = (csq[-1] - csq[k - 1]) - (csum[-1] - csum[k - 1]) ** 2 / (n - k)
            cost = left_cost + right_cost
            j = int(np.argmin(cost))
            if cost[j] < best_cost - 1e-12:
                best_cost = cost[j]
                best = (int(feat), float((xs[k[j] - 1] + xs[k[j]]) / 2))
        return best


class RandomForestModel:
    kind = "random_forest"

    def __init__(self, trees: list[Tree], prediction_mode: str, n_features: int):
        if prediction_mode not in ("regression", "probability"):
            raise ValueError(f"unknown prediction_mode {prediction_mode!r}")
        self.trees = trees
        self.prediction_mode = prediction_mode
        self.n_features = n_features

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.shape[0] == 0:
            return np.empty(0)
        acc = np.zeros(rows.shape[0])
        for tree in self.trees:
            acc += tree.predict(rows)
        return acc / len(self.trees)

    def parameters(self) -> dict:
        return {
            "n_features": self.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees
            ],
        }

    @staticmethod
    def from_parameters(params: dict, prediction_mode: str) -> "RandomForestModel":
        trees = [
            Tree(t["feature"], t["threshold"], t["left"], t["right"], t["value"])
            for t in params["trees"]
        ]
        return RandomForestModel(trees, prediction_mode, int(params["n_features"]))


def train_random_forest(
    train: DataTable,
    n_trees: int = 100,
    max_depth: int = 8,
    min_leaf: int = 5,
    seed: int = 0,
    prediction_mode: str | None = None,
    bootstrap: bool = True,
    n_split_features: int | None = None,
) -> RandomForestModel:
    """Bagged CART trees; binary {0,1} targets default to probability mode.

    Probability mode averages per-leaf class-1 fractions, which a variance
    split optimises exactly as Gini does for binary targets.  Tree t draws its
    bootstrap sample and split features from default_rng((seed, t)).
    """
    X = train.feature_matrix()
    y = train.target_values()
    n, p = X.shape
    if n < 1:
        raise ValueError("cannot train a forest on an empty table")
    if min_leaf < 1 or n_trees < 1 or max_depth < 1:
        raise ValueError("n_trees, max_depth and min_leaf must be >= 1")
    # min_leaf > n/2 admits no legal split; trees collapse to stumps
    if prediction_mode is None:
        prediction_mode = "probability" if set(np.unique(y)) <= {0.0, 1.0} else "regression"
    if n_split_features is None:
        n_split_features = max(1, round(math.sqrt(p)))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng((seed, t))
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        builder = _TreeBuilder(X[rows], y[rows], rng, max_depth, min_leaf, n_split_features)
        trees.append(builder.build())
    return RandomForestModel(trees, prediction_mode, p)
