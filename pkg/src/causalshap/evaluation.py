"""Attribution quality metrics: insertion curves for classification models
and RMSE against an exact reduced-feature ground truth for regression."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .attribution import exact_shapley, make_exact_marginal_value
from .datatable import DataTable, column_stats
from .graphs import Cpdag, enumerate_simple_paths
from .models import predict_batch

_CLAMP = 1e-7


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: probability that a random positive outscores a
    random negative, ties counted one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def cross_entropy(probabilities, labels) -> float:
    p = np.clip(np.asarray(probabilities, dtype=np.float64), _CLAMP, 1 - _CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


def brier(probabilities, labels) -> float:
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(((p - y) ** 2).mean())


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size == 0:
        raise ValueError(f"rmse needs equal nonempty shapes, got {a.shape} vs {b.shape}")
    return float(np.sqrt(((a - b) ** 2).mean()))


def global_importance(attribution_matrix) -> list[int]:
    """Feature order, most to least important, by mean |attribution| across
    instances; ties break toward the lower feature index."""
    matrix = np.asarray(attribution_matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError("need a nonempty (instances, features) matrix")
    mean_abs = np.abs(matrix).mean(axis=0)
    return sorted(range(matrix.shape[1]), key=lambda i: (-mean_abs[i], i))


@dataclass
class InsertionCurve:
    ranking: list[int]
    per_step: list[dict]  # k, auroc, cross_entropy, brier
    aggregate: dict

    def to_json(self) -> dict:
        return {
            "ranking": [int(i) for i in self.ranking],
            "per_step": self.per_step,
            "aggregate": self.aggregate,
        }


@dataclass
class InsertionReport:
    curves: list[InsertionCurve]
    mean: dict
    sd: dict

    @property
    def runs(self) -> int:
        return len(self.curves)

    def to_json(self) -> dict:
        return {
            "runs": self.runs,
            "mean": self.mean,
            "sd": self.sd,
            "curves": [c.to_json() for c in self.curves],
        }


def insertion_curve(model, test: DataTable, ranking, mask_values) -> InsertionCurve:
    """Reveal features most-to-least important, scoring masked predictions.

    At step k the top-k ranked features keep their test values and the rest
    sit at mask_values (training means by default upstream).  The aggregate
    is the arithmetic mean of each metric over all n steps.
    """
    X = test.feature_matrix()
    y = test.target_values()
    n_features = X.shape[1]
    ranking = list(ranking)
    if sorted(ranking) != list(range(n_features)):
        raise ValueError("ranking must be a permutation of feature indices")
    if model.prediction_mode != "probability":
        raise ValueError("insertion metrics need a probability-mode model")
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("insertion metrics need binary 0/1 labels")
    mask_values = np.asarray(mask_values, dtype=np.float64)
    per_step = []
    masked = np.tile(mask_values, (X.shape[0], 1))
    for k in range(1, n_features + 1):
        feat = ranking[k - 1]
        masked[:, feat] = X[:, feat]
        preds = predict_batch(model, masked)
        per_step.append(
            {
                "k": k,
                "auroc": auroc(preds, y),
                "cross_entropy": cross_entropy(preds, y),
                "brier": brier(preds, y),
            }
        )
    aggregate = {
        metric: float(np.mean([step[metric] for step in per_step]))
        for metric in ("auroc", "cross_entropy", "brier")
    }
    return InsertionCurve(ranking, per_step, aggregate)


def summarize_insertion_runs(curves: list[InsertionCurve]) -> InsertionReport:
    """Mean and standard deviation of the aggregate metrics across seeds."""
    metrics = ("auroc", "cross_entropy", "brier")
    values = {m: np.array([c.aggregate[m] for c in curves]) for m in metrics}
    mean = {m: float(values[m].mean()) for m in metrics}
    sd = {m: float(values[m].std(ddof=1)) if len(curves) > 1 else 0.0 for m in metrics}
    return InsertionReport(curves, mean, sd)


def reduced_feature_set(dag: Cpdag, target_index: int) -> list[int]:
    """Features with a directed path to the target and no incoming edges:
    the root causes whose exact attribution is well defined in isolation."""
    out = []
    for i in range(dag.n_nodes):
        if i == target_index or dag.parents(i):
            continue
        if enumerate_simple_paths(dag, i, target_index):
            out.append(i)
    return out


@dataclass
class GroundTruthReport:
    reduced_names: list[str]
    exact_values: np.ndarray  # per-feature median |phi| (primary aggregation)
    method_values: np.ndarray
    exact_mean_abs: np.ndarray
    method_mean_abs: np.ndarray
    exact_mean_signed: np.ndarray
    method_mean_signed: np.ndarray
    rmse: float
    rmse_mean_abs: float
    rmse_signed: float

    def to_json(self) -> dict:
        return {
            "reduced_features": self.reduced_names,
            "exact_median_abs": self.exact_values.tolist(),
            "method_median_abs": self.method_values.tolist(),
            "exact_mean_abs": self.exact_mean_abs.tolist(),
            "method_mean_abs": self.method_mean_abs.tolist(),
            "exact_mean_signed": self.exact_mean_signed.tolist(),
            "method_mean_signed": self.method_mean_signed.tolist(),
            "rmse": self.rmse,
            "rmse_mean_abs": self.rmse_mean_abs,
            "rmse_signed": self.rmse_signed,
        }


def reduced_feature_ground_truth(
    train_model,
    train: DataTable,
    test: DataTable,
    reduced_names: list[str],
    method_matrix,
    method_feature_names,
) -> GroundTruthReport:
    """Exact Shapley on a model retrained over the reduced columns only.

    ``train_model`` is the model family (table -> model).  The exact values
    use the deterministic interventional value function over the full train
    background, enumerated over every coalition of the reduced set.  The
    candidate method's full-set attributions are restricted to the reduced
    features; both sides are aggregated per feature over the test instances
    before taking the RMSE.  The primary aggregation is the median absolute
    attribution: the closing normalisation has heavy tails on instances where
    the weighted contributions nearly cancel, so means are dominated by a few
    near-singular instances.  Mean |phi| and the signed mean ride along.
    """
    if not reduced_names:
        raise ValueError("reduced feature set is empty")
    if len(reduced_names) > 12:
        raise ValueError("reduced set too large for exact enumeration (> 12)")
    target = train.target_name
    red_train = train.select_columns([*reduced_names, target], target)
    red_test = test.select_columns([*reduced_names, target], target)
    model = train_model(red_train)
    background = red_train.feature_matrix()
    X = red_test.feature_matrix()
    n_red = len(reduced_names)
    exact = np.empty((X.shape[0], n_red))
    for r in range(X.shape[0]):
        value = make_exact_marginal_value(model, background, X[r])
        exact[r] = exact_shapley(value, n_red)
    method_matrix = np.asarray(method_matrix, dtype=np.float64)
    cols = [list(method_feature_names).index(name) for name in reduced_names]
    method = method_matrix[:, cols]
    exact_med = np.median(np.abs(exact), axis=0)
    method_med = np.median(np.abs(method), axis=0)
    return GroundTruthReport(
        reduced_names=list(reduced_names),
        exact_values=exact_med,
        method_values=method_med,
        exact_mean_abs=np.abs(exact).mean(axis=0),
        method_mean_abs=np.abs(method).mean(axis=0),
        exact_mean_signed=exact.mean(axis=0),
        method_mean_signed=method.mean(axis=0),
        rmse=rmse(method_med, exact_med),
        rmse_mean_abs=rmse(np.abs(method).mean(axis=0), np.abs(exact).mean(axis=0)),
        rmse_signed=rmse(method.mean(axis=0), exact.mean(axis=0)),
    )


def mask_reference_values(train: DataTable, kind: str = "mean", seed: int = 0) -> np.ndarray:
    """Reference values for not-yet-inserted features: training means, or one
    seeded marginal draw per feature."""
    stats = column_stats(train)
    feature_cols = list(train.feature_indices)
    if kind == "mean":
        return stats.mean[feature_cols]
    if kind == "marginal-sample":
        rng = np.random.default_rng(seed)
        return np.array(
            [train.values[rng.integers(0, train.row_count), c] for c in feature_cols]
        )
    raise ValueError(f"unknown mask kind {kind!r}")
