"""Mixed graphs over named nodes: CPDAGs, DAG queries, and extensions.

Edges are stored as a boolean mark matrix ``adj`` where ``adj[i, j]`` means
there is a mark from i to j.  A pair with both marks set is an undirected
edge; exactly one mark is a directed edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNDIRECTED = "undirected"
DIRECTED = "directed"


class NotExtendableError(ValueError):
    """The CPDAG admits no DAG with the same skeleton and v-structures."""


@dataclass
class Cpdag:
    node_names: tuple[str, ...]
    adj: np.ndarray
    conflicts: list = field(default_factory=list)

    def __post_init__(self):
        self.node_names = tuple(self.node_names)
        self.adj = np.asarray(self.adj, dtype=bool)
        p = len(self.node_names)
        if self.adj.shape != (p, p):
            raise ValueError(f"mark matrix {self.adj.shape} for {p} nodes")
        if self.adj.diagonal().any():
            raise ValueError("self loops are not allowed")

    # -- basic queries -------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    def index(self, name: str) -> int:
        return self.node_names.index(name)

    def adjacent(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j] or self.adj[j, i])

    def has_directed(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j] and not self.adj[j, i])

    def has_undirected(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j] and self.adj[j, i])

    def parents(self, i: int) -> list[int]:
        return [j for j in range(self.n_nodes) if self.has_directed(j, i)]

    def children(self, i: int) -> list[int]:
        return [j for j in range(self.n_nodes) if self.has_directed(i, j)]

    def undirected_neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.n_nodes) if self.has_undirected(i, j)]

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.n_nodes) if self.adjacent(i, j)]

    def edges(self) -> list[tuple[int, int, str]]:
        """Each edge once: (i, j, mark) with i < j for undirected edges."""
        out = []
        for i in range(self.n_nodes):
            for j in range(self.n_nodes):
                if self.has_directed(i, j):
                    out.append((i, j, DIRECTED))
                elif i < j and self.has_undirected(i, j):
                    out.append((i, j, UNDIRECTED))
        return out

    def n_edges(self) -> int:
        return len(self.edges())

    # -- mutation ------------------------------------------------------
    def add_undirected(self, i: int, j: int) -> None:
        self.adj[i, j] = self.adj[j, i] = True

    def orient(self, i: int, j: int) -> None:
        """Turn the (existing) edge between i and j into i -> j."""
        self.adj[i, j] = True
        self.adj[j, i] = False

    def remove_edge(self, i: int, j: int) -> None:
        self.adj[i, j] = self.adj[j, i] = False

    def copy(self) -> "Cpdag":
        return Cpdag(self.node_names, self.adj.copy(), list(self.conflicts))

    # -- structure -----------------------------------------------------
    def skeleton_pairs(self) -> set[frozenset]:
        return {
            frozenset((i, j))
            for i in range(self.n_nodes)
            for j in range(i + 1, self.n_nodes)
            if self.adjacent(i, j)
        }

    def v_structures(self) -> set[tuple[int, int, int]]:
        """Unshielded colliders (i, k, j) with i < j and i -> k <- j."""
        out = set()
        for k in range(self.n_nodes):
            pa = self.parents(k)
            for a in range(len(pa)):
                for b in range(a + 1, len(pa)):
                    i, j = sorted((pa[a], pa[b]))
                    if not self.adjacent(i, j):
                        out.add((i, k, j))
        return out

    def is_fully_directed(self) -> bool:
        return not (self.adj & self.adj.T).any()

    def directed_part_is_acyclic(self) -> bool:
        directed = self.adj & ~self.adj.T
        return _is_acyclic(directed)

    def topological_order(self) -> list[int]:
        """Kahn order of the directed part (ties broken by node index)."""
        directed = self.adj & ~self.adj.T
        indeg = directed.sum(axis=0).astype(int)
        order: list[int] = []
        ready = [i for i in range(self.n_nodes) if indeg[i] == 0]
        while ready:
            node = ready.pop(0)
            order.append(node)
            for child in np.nonzero(directed[node])[0]:
                indeg[child] -= 1
                if indeg[child] == 0:
                    # keep the ready list sorted for determinism
                    lo = 0
                    while lo < len(ready) and ready[lo] < child:
                        lo += 1
                    ready.insert(lo, int(child))
        if len(order) != self.n_nodes:
            raise ValueError("directed part contains a cycle")
        return order

    # -- serialisation ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "nodes": list(self.node_names),
            "edges": [
                {"from": self.node_names[i], "to": self.node_names[j], "mark": mark}
                for i, j, mark in self.edges()
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "Cpdag":
        names = tuple(obj["nodes"])
        g = empty_graph(names)
        for edge in obj["edges"]:
            i, j = names.index(edge["from"]), names.index(edge["to"])
            if edge["mark"] == UNDIRECTED:
                g.add_undirected(i, j)
            elif edge["mark"] == DIRECTED:
                g.adj[i, j] = True
            else:
                raise ValueError(f"unknown edge mark {edge['mark']!r}")
        return g

    def to_dot(self) -> str:
        lines = ["digraph g {"]
        for name in self.node_names:
            lines.append(f'  "{name}";')
        for i, j, mark in self.edges():
            attr = " [dir=none]" if mark == UNDIRECTED else ""
            lines.append(f'  "{self.node_names[i]}" -> "{self.node_names[j]}"{attr};')
        lines.append("}")
        return "\n".join(lines) + "\n"


def empty_graph(names) -> Cpdag:
    p = len(names)
    return Cpdag(tuple(names), np.zeros((p, p), dtype=bool))


def complete_undirected_graph(names) -> Cpdag:
    p = len(names)
    adj = np.ones((p, p), dtype=bool)
    np.fill_diagonal(adj, False)
    return Cpdag(tuple(names), adj)


def dag_from_edges(names, edges) -> Cpdag:
    g = empty_graph(names)
    for i, j in edges:
        g.adj[i, j] = True
    if not g.directed_part_is_acyclic():
        raise ValueError("edge list contains a directed cycle")
    return g


def _is_acyclic(directed: np.ndarray) -> bool:
    p = directed.shape[0]
    indeg = directed.sum(axis=0).astype(int)
    queue = [i for i in range(p) if indeg[i] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for child in np.nonzero(directed[node])[0]:
            indeg[child] -= 1
            if indeg[child] == 0:
                queue.append(int(child))
    return seen == p


class DsepOracle:
    """d-separation queries on a DAG, usable as a PC conditional-independence
    test (ancestral moralisation + reachability, bitmask sets)."""

    def __init__(self, dag: Cpdag):
        if not dag.is_fully_directed():
            raise ValueError("d-separation needs a fully directed graph")
        if not dag.directed_part_is_acyclic():
            raise ValueError("d-separation needs an acyclic graph")
        p = dag.n_nodes
        self.n_nodes = p
        self.parent_mask = [0] * p
        self.child_mask = [0] * p
        for i in range(p):
            for j in dag.parents(i):
                self.parent_mask[i] |= 1 << j
            for j in dag.children(i):
                self.child_mask[i] |= 1 << j

    def d_separated(self, i: int, j: int, Z) -> bool:
        zmask = 0
        for z in Z:
            zmask |= 1 << z
        if zmask & ((1 << i) | (1 << j)):
            raise ValueError("conditioning set may not contain the tested pair")
        # ancestors of {i, j} union Z, including themselves
        anc = (1 << i) | (1 << j) | zmask
        frontier = anc
        while frontier:
            new = 0
            f = frontier
            while f:
                node = (f & -f).bit_length() - 1
                f &= f - 1
                new |= self.parent_mask[node]
            frontier = new & ~anc
            anc |= new
        # moral graph restricted to the ancestral set
        und = [0] * self.n_nodes
        nodes = anc
        while nodes:
            node = (nodes & -nodes).bit_length() - 1
            nodes &= nodes - 1
            und[node] |= (self.parent_mask[node] | self.child_mask[node]) & anc
            # marry parents of this node
            pa = self.parent_mask[node] & anc
            f = pa
            while f:
                a = (f & -f).bit_length() - 1
                f &= f - 1
                und[a] |= pa & ~(1 << a)
        # reachability from i avoiding Z
        reached = 1 << i
        frontier = reached
        blocked = zmask
        while frontier:
            new = 0
            f = frontier
            while f:
                node = (f & -f).bit_length() - 1
                f &= f - 1
                new |= und[node]
            frontier = new & ~reached & ~blocked
            reached |= frontier
            if reached & (1 << j):
                return False
        return True

    def ci_test(self, i: int, j: int, Z) -> bool:
        """PC-compatible signature: True means conditionally independent."""
        return self.d_separated(i, j, Z)


def consistent_dag_extension(cpdag: Cpdag) -> Cpdag:
    """One DAG with the same skeleton and v-structures as the input.

    Sink elimination: repeatedly take a node with no outgoing directed edges
    whose undirected neighbours are adjacent to all its other neighbours, and
    orient its undirected edges inward.  Candidates are scanned from the
    highest index down, so an undirected chain orients in ascending node
    order.  Raises NotExtendableError when no consistent extension exists.
    """
    work = cpdag.copy()
    result = cpdag.copy()
    result.conflicts = list(cpdag.conflicts)
    alive = set(range(cpdag.n_nodes))
    while alive:
        eliminated = None
        for x in sorted(alive, reverse=True):
            if any(work.has_directed(x, j) for j in alive):
                continue
            nbrs = [j for j in work.neighbors(x) if j in alive]
            und = [j for j in nbrs if work.has_undirected(x, j)]
            ok = all(
                work.adjacent(u, w) for u in und for w in nbrs if w != u
            )
            if not ok:
                continue
            for u in und:
                result.orient(u, x)
            for j in nbrs:
                work.remove_edge(x, j)
            alive.remove(x)
            eliminated = x
            break
        if eliminated is None:
            raise NotExtendableError(
                "CPDAG admits no consistent extension (no eligible sink)"
            )
    if not result.is_fully_directed() or not result.directed_part_is_acyclic():
        raise NotExtendableError("extension failed to produce a DAG")
    return result


def enumerate_simple_paths(dag: Cpdag, source: int, target: int) -> list[list[tuple[int, int]]]:
    """All directed simple paths source -> ... -> target as edge lists.

    Depth-first with children visited in node order, so output order is
    deterministic.  Returns [] when the target is unreachable.
    """
    if not dag.is_fully_directed():
        raise ValueError("path enumeration needs a fully directed DAG")
    paths: list[list[tuple[int, int]]] = []
    stack: list[tuple[int, int]] = []
    on_path = {source}

    def visit(node: int) -> None:
        if node == target:
            paths.append(list(stack))
            return
        for child in dag.children(node):
            if child in on_path:
                continue
            stack.append((node, child))
            on_path.add(child)
            visit(child)
            on_path.remove(child)
            stack.pop()

    visit(source)
    return paths
