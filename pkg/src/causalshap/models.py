"""Black-box predictors behind a uniform batch-predict contract.

Every model maps a (rows, n_features) matrix to a vector of finite reals.
``probability`` mode additionally guarantees outputs in [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .datatable import DataTable


class SingularSystemError(np.linalg.LinAlgError):
    """The unregularised normal equations are singular."""


@dataclass(frozen=True)
class Baseline:
    """E[f(X)] over the training rows (Monte Carlo reference value)."""

    expected_prediction: float
    training_row_count: int


class LinearModel:
    kind = "linear"
    prediction_mode = "regression"

    def __init__(self, weights, intercept: float):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.intercept = float(intercept)
        self.n_features = self.weights.shape[0]

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = _check_rows(rows, self.n_features)
        return rows @ self.weights + self.intercept

    def parameters(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept}


def train_linear(train: DataTable, ridge_lambda: float = 0.0) -> LinearModel:
    """Ridge regression by normal equations with an unpenalised intercept.

    Solved on centred data via Cholesky; the unregularised problem raises
    SingularSystemError when X'X is not positive definite.
    """
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    X = train.feature_matrix()
    y = train.target_values()
    n, p = X.shape
    if ridge_lambda == 0.0 and n <= p:
        raise SingularSystemError(f"{n} rows cannot determine {p} weights at lambda=0")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc + ridge_lambda * np.eye(p)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular normal equations: {exc}") from exc
    rhs = Xc.T @ (y - y_mean)
    w = _cho_solve(chol, rhs)
    return LinearModel(w, y_mean - x_mean @ w)


def _cho_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    import scipy.linalg

    z = scipy.linalg.solve_triangular(chol, rhs, lower=True)
    return scipy.linalg.solve_triangular(chol.T, z, lower=False)


def predict_batch(model, rows: np.ndarray) -> np.ndarray:
    """Uniform entry point: returns one finite real per row."""
    rows = _check_rows(rows, model.n_features)
    if rows.shape[0] == 0:
        return np.empty(0)
    out = np.asarray(model.predict(rows), dtype=np.float64)
    if out.shape != (rows.shape[0],):
        raise ValueError(f"model returned {out.shape} predictions for {rows.shape[0]} rows")
    if not np.isfinite(out).all():
        raise ValueError("model returned non-finite predictions")
    return out


def expected_prediction(model, train: DataTable) -> Baseline:
    """Arithmetic mean of the model over the training rows."""
    if train.row_count == 0:
        raise ValueError("cannot take a baseline over an empty training set")
    preds = predict_batch(model, train.feature_matrix())
    return Baseline(float(preds.mean()), train.row_count)


def _check_rows(rows, n_features: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1) if rows.size else rows.reshape(0, n_features)
    if rows.ndim != 2 or rows.shape[1] != n_features:
        raise ValueError(f"expected rows of width {n_features}, got shape {rows.shape}")
    return rows


def save_model(model, path) -> None:
    """Persist a built-in model as {"kind", "prediction_mode", "parameters"}."""
    if model.kind not in ("linear", "random_forest"):
        raise ValueError(f"cannot persist model kind {model.kind!r}")
    doc = {
        "kind": model.kind,
        "prediction_mode": model.prediction_mode,
        "parameters": model.parameters(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path):
    from .forest import RandomForestModel

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc["kind"] == "linear":
        params = doc["parameters"]
        return LinearModel(params["weights"], params["intercept"])
    if doc["kind"] == "random_forest":
        return RandomForestModel.from_parameters(doc["parameters"], doc["prediction_mode"])
    raise ValueError(f"unknown model kind {doc['kind']!r} in {path}")
