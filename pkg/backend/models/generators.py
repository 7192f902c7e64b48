"""
Synthetic DAG generators for benchmark data: bipartite, scale-free
(preferential attachment with m=1) and uniformly random DAGs.
"""
import logging
from typing import Optional

import numpy as np

from backend.models.graph import DagGraph
from backend.utils.config import GRAPH_TYPES
from backend.utils.exceptions import ConfigError, InfeasibleEdgeCount

logger = logging.getLogger(__name__)


def gen_bipartite(p: int, seed=None, s0: Optional[int] = None, strict: bool = False) -> DagGraph:
    """
    Bipartite DAG with round(0.2p) upper (source) nodes and the rest lower.

    Args:
        p (int): Node count, at least 5.
        seed: Seed for numpy's default_rng.
        s0 (int, optional): Edge count, defaults to p.
        strict (bool): Raise InfeasibleEdgeCount instead of clamping s0.

    Returns:
        DagGraph: Upper nodes are 0..upper-1, every edge points upper -> lower.
    """
    if p < 5:
        raise ValueError(f"bipartite graphs need p >= 5, got {p}")
    upper = int(round(0.2 * p))
    lower = p - upper
    s0 = p if s0 is None else s0
    capacity = upper * lower
    if s0 > capacity:
        if strict:
            raise InfeasibleEdgeCount(f"{s0} edges requested but only {capacity} upper->lower pairs exist")
        logger.warning("bipartite p=%d: clamping edge count %d to %d", p, s0, capacity)
        s0 = capacity

    rng = np.random.default_rng(seed)
    picks = rng.choice(capacity, size=s0, replace=False)
    adj = np.zeros((p, p), dtype=bool)
    u, l = np.divmod(picks, lower)
    adj[u, upper + l] = True
    return DagGraph(p, adj)


def gen_scale_free(p: int, power: float = -3.0, seed=None) -> DagGraph:
    """
    Preferential attachment with one edge per new node.

    Node t attaches to an earlier node k with probability proportional to
    (degree(k) + 1) ** power; the edge is oriented k -> t.
    """
    if p < 2:
        raise ValueError(f"scale-free graphs need p >= 2, got {p}")
    rng = np.random.default_rng(seed)
    degree = np.zeros(p)
    adj = np.zeros((p, p), dtype=bool)
    for t in range(1, p):
        weights = (degree[:t] + 1.0) ** power
        target = rng.choice(t, p=weights / weights.sum())
        adj[target, t] = True
        degree[target] += 1
        degree[t] += 1
    return DagGraph(p, adj)


def gen_random_dag(p: int, s0: Optional[int] = None, seed=None) -> DagGraph:
    """Random DAG: a random node order, then s0 order-respecting pairs (default s0 = p)."""
    s0 = p if s0 is None else s0
    max_edges = p * (p - 1) // 2
    if s0 > max_edges:
        raise InfeasibleEdgeCount(f"{s0} edges requested but a DAG on {p} nodes has at most {max_edges}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    rows, cols = np.triu_indices(p, k=1)
    picks = rng.choice(max_edges, size=s0, replace=False)
    adj = np.zeros((p, p), dtype=bool)
    adj[order[rows[picks]], order[cols[picks]]] = True
    return DagGraph(p, adj)


def generate_graph(graph_type: str, p: int, seed=None, edge_count: Optional[int] = None,
                   power: float = -3.0, strict: bool = False) -> DagGraph:
    if graph_type == 'bipartite':
        return gen_bipartite(p, seed=seed, s0=edge_count, strict=strict)
    if graph_type == 'scale_free':
        if edge_count is not None and edge_count != p - 1:
            logger.warning("scale-free graphs always have p-1 edges; ignoring edge count %d", edge_count)
        return gen_scale_free(p, power=power, seed=seed)
    if graph_type == 'random':
        return gen_random_dag(p, s0=edge_count, seed=seed)
    raise ConfigError(f"unknown graph type {graph_type!r}, expected one of {', '.join(GRAPH_TYPES)}")
