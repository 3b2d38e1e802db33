"""Per-edge causal strength over a CPDAG and total effects on the target.

Edge strengths follow the local intervention-calculus recipe: for an edge
j -> k of the chosen DAG extension, regress k on {j} + pa(j) + S for every
admissible sibling subset S, and keep the multiset of j-coefficients.  Path
products of the summarised edge weights then give each feature's total
effect on the target and the normalised weight factors used downstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .datatable import DataTable
from .graphs import Cpdag, consistent_dag_extension, enumerate_simple_paths


@dataclass
class CausalEffects:
    """Edge multisets/weights on one DAG extension plus per-feature totals.

    ``gamma`` aligns with table.feature_indices.  When every total effect is
    zero there is no causal signal; gamma is all zeros and the flag is set so
    callers can fall back to unweighted attribution.
    """

    extension: Cpdag
    target_index: int
    feature_indices: tuple[int, ...]
    edge_multisets: dict[tuple[int, int], list[float]]
    edge_weights: dict[tuple[int, int], float]
    paths: dict[int, list[list[tuple[int, int]]]]
    path_effects: dict[int, list[float]]
    total_effects: dict[int, float]
    gamma: np.ndarray
    no_causal_signal: bool
    skipped: list = field(default_factory=list)

    def to_json(self) -> dict:
        names = self.extension.node_names
        return {
            "edges": [
                {
                    "from": names[j],
                    "to": names[k],
                    "multiset": list(self.edge_multisets[(j, k)]),
                    "weight": self.edge_weights[(j, k)],
                }
                for j, k in sorted(self.edge_weights)
            ],
            "total_effects": {names[i]: self.total_effects[i] for i in self.feature_indices},
            "gamma": {
                names[i]: float(g) for i, g in zip(self.feature_indices, self.gamma)
            },
            "no_causal_signal": self.no_causal_signal,
            "dag_extension": self.extension.to_json(),
        }


def _admissible_sibling_subsets(cpdag: Cpdag, j: int, exclude: int):
    """Subsets S of j's undirected neighbours (minus ``exclude``) such that
    directing S -> j creates no new collider at j: S must be pairwise
    adjacent and each member adjacent to every existing parent of j."""
    parents = cpdag.parents(j)
    siblings = [s for s in cpdag.undirected_neighbors(j) if s != exclude]
    for size in range(len(siblings) + 1):
        for subset in itertools.combinations(siblings, size):
            ok = all(
                cpdag.adjacent(subset[a], subset[b])
                for a in range(len(subset))
                for b in range(a + 1, len(subset))
            ) and all(cpdag.adjacent(s, p) for s in subset for p in parents)
            if ok:
                yield subset


def _adjusted_coefficient(table: DataTable, j: int, k: int, adjust) -> float:
    """Coefficient of column j in the least-squares fit of k on {j} + adjust."""
    cols = [j, *adjust]
    X = np.column_stack([table.values[:, c] for c in cols])
    X = np.column_stack([X, np.ones(table.row_count)])
    y = table.values[:, k]
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError(f"rank-deficient adjustment set {cols}")
    return float(coef[0])


def ida_effect_multiset(
    table: DataTable, cpdag: Cpdag, j: int, k: int, skipped: list | None = None
) -> list[float]:
    """One adjusted effect of j on k per admissible parent-set choice.

    A fully directed neighbourhood gives a single-element multiset.  Singular
    regressions skip that candidate and leave a record.
    """
    if not cpdag.adjacent(j, k):
        raise ValueError(f"{j} and {k} are not adjacent")
    out = []
    for subset in _admissible_sibling_subsets(cpdag, j, exclude=k):
        adjust = [*cpdag.parents(j), *subset]
        try:
            out.append(_adjusted_coefficient(table, j, k, adjust))
        except np.linalg.LinAlgError as exc:
            if skipped is not None:
                skipped.append({"edge": (j, k), "adjustment": adjust, "reason": str(exc)})
    return out


def edge_weight(multiset: list[float], summary: str = "mean") -> float:
    """Summarise an effect multiset; the classic minimum-|effect| variant is
    available as ``summary="min_abs"``."""
    if not multiset:
        raise ValueError("empty effect multiset")
    if summary == "mean":
        return float(np.mean(multiset))
    if summary == "min_abs":
        return float(min(multiset, key=abs))
    raise ValueError(f"unknown multiset summary {summary!r}")


def total_effect(edge_weights: dict[tuple[int, int], float], paths) -> float:
    """Sum over paths of the product of edge weights along each path."""
    total = 0.0
    for path in paths:
        product = 1.0
        for edge in path:
            if edge not in edge_weights:
                raise KeyError(f"no weight for edge {edge}")
            product *= edge_weights[edge]
        total += product
    return total


def causal_weight_factors(total_effects: dict[int, float], feature_indices) -> tuple[np.ndarray, bool]:
    """gamma_i = |W_i| / sum_j |W_j|; an all-zero W vector is flagged rather
    than raising, with gamma identically zero."""
    w = np.array([abs(total_effects[i]) for i in feature_indices], dtype=np.float64)
    denom = w.sum()
    if denom == 0.0:
        return np.zeros_like(w), True
    return w / denom, False


def estimate_effects(
    table: DataTable,
    cpdag: Cpdag,
    target_index: int | None = None,
    summary: str = "mean",
) -> CausalEffects:
    """Full effect pipeline on one deterministic DAG extension of the CPDAG."""
    if target_index is None:
        target_index = table.target_index
    extension = consistent_dag_extension(cpdag)
    skipped: list = []
    edge_multisets: dict[tuple[int, int], list[float]] = {}
    edge_weights: dict[tuple[int, int], float] = {}
    for j, k, _mark in extension.edges():
        multiset = ida_effect_multiset(table, cpdag, j, k, skipped)
        edge_multisets[(j, k)] = multiset
        if multiset:
            edge_weights[(j, k)] = edge_weight(multiset, summary)
        else:
            skipped.append({"edge": (j, k), "reason": "no admissible parent set"})
            edge_weights[(j, k)] = 0.0
    feature_indices = tuple(i for i in range(table.n_columns) if i != target_index)
    paths = {i: enumerate_simple_paths(extension, i, target_index) for i in feature_indices}
    path_effects = {
        i: [total_effect(edge_weights, [p]) for p in paths[i]] for i in feature_indices
    }
    totals = {i: float(sum(path_effects[i])) for i in feature_indices}
    gamma, degenerate = causal_weight_factors(totals, feature_indices)
    return CausalEffects(
        extension=extension,
        target_index=target_index,
        feature_indices=feature_indices,
        edge_multisets=edge_multisets,
        edge_weights=edge_weights,
        paths=paths,
        path_effects=path_effects,
        total_effects=totals,
        gamma=gamma,
        no_causal_signal=degenerate,
        skipped=skipped,
    )
