"""
Directed graph values, reachability and ordering.

Edge convention used everywhere in the package: ``adj[j, i]`` is True when
there is an edge j -> i, i.e. j is a parent of i, which is also exactly when
the coefficient block beta_{i.j} may be nonzero.
"""
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from backend.utils.exceptions import CyclicGraph, NodeOutOfRange, ShapeMismatch

Edge = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class DagGraph:
    """
    A directed graph on nodes 0..p-1.

    Args:
        p (int): Number of nodes.
        adj (np.ndarray): p x p boolean matrix, adj[j, i] meaning edge j -> i.
        labels (tuple, optional): Node names.
    """
    p: int
    adj: np.ndarray
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        adj = np.array(self.adj, dtype=bool)
        if adj.shape != (self.p, self.p):
            raise ShapeMismatch(f"adjacency must be {self.p}x{self.p}, got {adj.shape}")
        if adj.diagonal().any():
            raise ValueError("self-loops are not allowed")
        if self.labels is not None and len(self.labels) != self.p:
            raise ShapeMismatch(f"expected {self.p} labels, got {len(self.labels)}")
        adj.setflags(write=False)
        object.__setattr__(self, 'adj', adj)
        if self.labels is not None:
            object.__setattr__(self, 'labels', tuple(self.labels))

    @classmethod
    def empty(cls, p: int, labels: Optional[Sequence[str]] = None) -> "DagGraph":
        return cls(p, np.zeros((p, p), dtype=bool), labels)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[Edge], labels: Optional[Sequence[str]] = None) -> "DagGraph":
        adj = np.zeros((p, p), dtype=bool)
        for j, i in edges:
            if not (0 <= j < p and 0 <= i < p):
                raise NodeOutOfRange(f"edge {j}->{i} outside 0..{p - 1}")
            adj[j, i] = True
        return cls(p, adj, labels)

    def edges(self) -> List[Edge]:
        """Sorted (parent, child) pairs."""
        return [(int(j), int(i)) for j, i in zip(*np.nonzero(self.adj))]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    def parents(self, i: int) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.adj[:, i])]

    def with_edges_removed(self, edges: Iterable[Edge]) -> "DagGraph":
        adj = self.adj.copy()
        for j, i in edges:
            adj[j, i] = False
        return DagGraph(self.p, adj, self.labels)

    def relabel(self, perm: Sequence[int]) -> "DagGraph":
        """Graph with node k renamed to perm[k]; labels travel with their nodes."""
        perm = np.asarray(perm)
        adj = np.zeros_like(self.adj)
        adj[np.ix_(perm, perm)] = self.adj
        labels = None
        if self.labels is not None:
            moved = [None] * self.p
            for k, label in enumerate(self.labels):
                moved[perm[k]] = label
            labels = tuple(moved)
        return DagGraph(self.p, adj, labels)

    def __eq__(self, other):
        if not isinstance(other, DagGraph):
            return NotImplemented
        return (self.p == other.p and np.array_equal(self.adj, other.adj)
                and self.labels == other.labels)

    def __hash__(self):
        return hash((self.p, self.adj.tobytes(), self.labels))


@dataclass(frozen=True, eq=False)
class PathMatrix:
    """reach[i, j] is True iff a directed path of length >= 1 runs from i to j."""
    reach: np.ndarray

    def cycle_closing(self, i: int, j: int) -> bool:
        """True when adding edge j -> i would close a cycle (path i -> j exists)."""
        return bool(self.reach[i, j])

    def __eq__(self, other):
        if not isinstance(other, PathMatrix):
            return NotImplemented
        return np.array_equal(self.reach, other.reach)


def path_matrix(g: DagGraph) -> PathMatrix:
    """Reachability by breadth-first search from every node."""
    graph = csr_matrix(g.adj.astype(np.int8))
    reach = np.zeros((g.p, g.p), dtype=bool)
    for i in range(g.p):
        order = breadth_first_order(graph, i, directed=True, return_predecessors=False)
        reach[i, order] = True
        # BFS always lists the source; it reaches itself only if some
        # reached node points back to it.
        reach[i, i] = bool(g.adj[order, i].any())
    reach.setflags(write=False)
    return PathMatrix(reach)


def is_dag(g: DagGraph) -> bool:
    return not path_matrix(g).reach.diagonal().any()


def to_networkx(g: DagGraph) -> nx.DiGraph:
    graph = nx.DiGraph()
    for k in range(g.p):
        graph.add_node(k, label=g.labels[k] if g.labels else f"x{k}")
    graph.add_edges_from(g.edges())
    return graph


def topo_sort(g: DagGraph) -> List[int]:
    """Topological order, ties broken by ascending node index."""
    try:
        return list(nx.lexicographical_topological_sort(to_networkx(g)))
    except nx.NetworkXUnfeasible as e:
        raise CyclicGraph("graph contains a directed cycle") from e
