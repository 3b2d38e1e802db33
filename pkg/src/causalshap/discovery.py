"""Constraint-based causal discovery: Gaussian CI tests and the PC algorithm.

The conditional-independence test is pluggable; pass a callable
``(i, j, Z) -> bool`` (True = independent) to substitute e.g. a
d-separation oracle for the default Fisher-z test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .datatable import DataTable
from .graphs import Cpdag, complete_undirected_graph

_PCORR_CLAMP = 1.0 - 1e-12


class DegenerateConditioningError(ValueError):
    """The conditioning submatrix is singular; the pair is treated as dependent."""


@dataclass(frozen=True)
class CiTestResult:
    pair: tuple[int, int]
    conditioning_set: frozenset
    partial_correlation: float
    statistic: float
    independent: bool


def _correlation_matrix(table: DataTable) -> np.ndarray:
    values = table.values
    sd = values.std(axis=0, ddof=0)
    if (sd == 0).any():
        bad = [table.column_names[j] for j in np.nonzero(sd == 0)[0]]
        raise DegenerateConditioningError(f"constant columns {bad} have no correlations")
    return np.corrcoef(values, rowvar=False)


def _pcorr_from_corr(corr: np.ndarray, i: int, j: int, Z) -> float:
    idx = [i, j, *Z]
    sub = corr[np.ix_(idx, idx)]
    try:
        prec = np.linalg.inv(sub)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConditioningError(f"singular submatrix for ({i},{j}|{set(Z)})") from exc
    denom = prec[0, 0] * prec[1, 1]
    if not np.isfinite(prec).all() or denom <= 0:
        raise DegenerateConditioningError(f"ill-conditioned submatrix for ({i},{j}|{set(Z)})")
    r = -prec[0, 1] / math.sqrt(denom)
    return float(np.clip(r, -_PCORR_CLAMP, _PCORR_CLAMP))


def partial_correlation(table: DataTable, i: int, j: int, Z) -> float:
    """Correlation of i and j after linear projection onto Z.

    Computed by inverting the correlation submatrix of {i, j} + Z; the value
    is clamped away from +-1 so the Fisher transform stays finite.
    """
    Z = tuple(Z)
    if i == j or i in Z or j in Z:
        raise ValueError("i, j must be distinct and disjoint from Z")
    if len(Z) > table.row_count - 4:
        raise ValueError(f"conditioning set of size {len(Z)} needs more rows")
    return _pcorr_from_corr(_correlation_matrix(table), i, j, Z)


def fisher_z_test(
    pcorr: float,
    n: int,
    z_size: int,
    alpha: float,
    pair: tuple[int, int] = (-1, -1),
    conditioning_set=frozenset(),
) -> CiTestResult:
    """Gaussian test of zero partial correlation.

    statistic = sqrt(n - |Z| - 3) * atanh(r); independence is declared when
    |statistic| <= the two-sided normal critical value at level alpha.
    """
    dof = n - z_size - 3
    if dof < 1:
        raise ValueError(f"need n - |Z| - 3 >= 1, got {dof}")
    statistic = math.sqrt(dof) * math.atanh(pcorr)
    critical = norm.ppf(1.0 - alpha / 2.0)
    return CiTestResult(
        pair=pair,
        conditioning_set=frozenset(conditioning_set),
        partial_correlation=pcorr,
        statistic=statistic,
        independent=abs(statistic) <= critical,
    )


def make_fisher_z_ci(table: DataTable, alpha: float):
    """Fisher-z CI test over a precomputed correlation matrix.

    Degenerate (singular) conditioning sets count as dependent, which keeps
    the edge and is the conservative choice for a skeleton search.
    """
    corr = _correlation_matrix(table)
    n = table.row_count

    def ci(i: int, j: int, Z) -> bool:
        try:
            r = _pcorr_from_corr(corr, i, j, Z)
        except DegenerateConditioningError:
            return False
        return fisher_z_test(r, n, len(Z), alpha, pair=(i, j), conditioning_set=Z).independent

    return ci


SepsetTable = dict  # frozenset({i, j}) -> frozenset of separating nodes


def default_max_cond_size(n_columns: int) -> int:
    return min(n_columns - 2, 3)


def pc_skeleton(
    table: DataTable | None,
    alpha: float = 0.05,
    max_cond_size: int | None = None,
    ci_test=None,
    node_names=None,
) -> tuple[Cpdag, SepsetTable]:
    """Stable skeleton phase: level-wise CI sweeps over a full graph.

    Within one level, adjacency sets are frozen and removals are applied at
    sweep end, so the result does not depend on pair enumeration order.  For
    each ordered adjacent pair (i, j), conditioning sets of the level's size
    are drawn from adj(i) \\ {j} in index order; the first independence
    removes the edge and records the separating set.
    """
    if ci_test is None:
        if table is None:
            raise ValueError("need a table or an explicit ci_test")
        ci_test = make_fisher_z_ci(table, alpha)
    if node_names is None:
        node_names = table.column_names
    p = len(node_names)
    if max_cond_size is None:
        max_cond_size = default_max_cond_size(p)
    if table is not None and table.row_count <= max_cond_size + 3:
        raise ValueError(
            f"{table.row_count} rows cannot support conditioning sets of size {max_cond_size}"
        )
    graph = complete_undirected_graph(node_names)
    sepsets: SepsetTable = {}
    level = 0
    while level <= max_cond_size:
        adjacency = {i: graph.undirected_neighbors(i) for i in range(p)}
        if all(len(adjacency[i]) - 1 < level for i in range(p)):
            break
        removals: dict[frozenset, frozenset] = {}
        for i in range(p):
            for j in adjacency[i]:
                pair = frozenset((i, j))
                if pair in removals:
                    continue
                pool = [k for k in adjacency[i] if k != j]
                if len(pool) < level:
                    continue
                for Z in itertools.combinations(pool, level):
                    if ci_test(i, j, Z):
                        removals[pair] = frozenset(Z)
                        break
        for pair, sepset in removals.items():
            i, j = sorted(pair)
            graph.remove_edge(i, j)
            sepsets[pair] = sepset
        level += 1
    return graph, sepsets


def orient_v_structures(skeleton: Cpdag, sepsets: SepsetTable) -> Cpdag:
    """Orient i -> k <- j for unshielded triples whose middle node is not in
    the recorded separating set.

    When a later collider would reverse an already-directed edge, the first
    orientation wins and the conflict is recorded on the graph.
    """
    g = skeleton.copy()
    p = g.n_nodes
    for i in range(p):
        for j in range(i + 1, p):
            if g.adjacent(i, j):
                continue
            sepset = sepsets.get(frozenset((i, j)))
            if sepset is None:
                continue
            for k in range(p):
                if k in (i, j) or not (g.adjacent(i, k) and g.adjacent(j, k)):
                    continue
                if k in sepset:
                    continue
                for tail in (i, j):
                    if g.has_directed(k, tail):
                        g.conflicts.append((tail, k, f"collider {i}->{k}<-{j} vs existing"))
                    else:
                        g.orient(tail, k)
    return g


def apply_meek_rules(cpdag: Cpdag) -> Cpdag:
    """Meek rules R1-R4 to a fixed point.

    R1: a -> b - c with a, c nonadjacent            => b -> c
    R2: a -> b -> c with a - c                      => a -> c
    R3: a - b, a - c, a - d, c -> b, d -> b,
        c, d nonadjacent                            => a -> b
    R4: a - b with a chain c -> d -> b, a and c
        adjacent, c and b nonadjacent               => a -> b
        (b -> a would force the new collider b -> a <- c or a cycle)
    """
    g = cpdag.copy()
    p = g.n_nodes
    changed = True
    while changed:
        changed = False
        for a in range(p):
            for b in range(p):
                if not g.has_undirected(a, b):
                    continue
                if _meek_fires(g, a, b):
                    g.orient(a, b)
                    changed = True
    return g


def _meek_fires(g: Cpdag, a: int, b: int) -> bool:
    p = g.n_nodes
    # R1 (orienting b's side): x -> a - b, x and b nonadjacent
    for x in g.parents(a):
        if not g.adjacent(x, b):
            return True
    # R2: a -> x -> b with a - b
    for x in g.children(a):
        if g.has_directed(x, b):
            return True
    # R3: a - c, a - d, c -> b, d -> b, c and d nonadjacent
    into_b = [c for c in g.parents(b) if g.has_undirected(a, c)]
    for u in range(len(into_b)):
        for v in range(u + 1, len(into_b)):
            if not g.adjacent(into_b[u], into_b[v]):
                return True
    # R4: chain c -> d -> b with a adjacent to c and c, b nonadjacent
    for d in g.parents(b):
        for c in g.parents(d):
            if c != a and c != b and g.adjacent(a, c) and not g.adjacent(c, b):
                return True
    return False


def pc(
    table: DataTable | None,
    alpha: float = 0.05,
    max_cond_size: int | None = None,
    ci_test=None,
    node_names=None,
) -> Cpdag:
    """Full PC: stable skeleton, collider orientation, Meek closure."""
    skeleton, sepsets = pc_skeleton(table, alpha, max_cond_size, ci_test, node_names)
    return apply_meek_rules(orient_v_structures(skeleton, sepsets))


def dag_to_cpdag(dag: Cpdag) -> Cpdag:
    """CPDAG of the DAG's Markov equivalence class (skeleton + colliders,
    then Meek closure)."""
    if not dag.is_fully_directed() or not dag.directed_part_is_acyclic():
        raise ValueError("dag_to_cpdag expects a DAG")
    g = Cpdag(dag.node_names, dag.adj | dag.adj.T)
    for i, k, j in dag.v_structures():
        g.orient(i, k)
        g.orient(j, k)
    return apply_meek_rules(g)
