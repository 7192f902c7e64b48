"""
Greedy hill-climbing baseline over DAGs with a BIC-penalized multinomial score.
"""
import logging
from typing import Dict, Tuple

import networkx as nx
import numpy as np
from scipy.special import xlogy

from backend.models.graph import DagGraph, path_matrix, to_networkx
from backend.models.multi_logit import Dataset
from backend.utils.exceptions import EmptyInput

logger = logging.getLogger(__name__)

ADD, DELETE, REVERSE = 0, 1, 2


class HillClimbing:
    """
    Greedy search over single-edge additions, deletions and reversals.

    Every iteration applies the legal move with the largest score gain and the
    search stops at a local optimum. Only moves that keep the graph acyclic and
    respect ``max_parents`` are considered.

    Args:
        data (Dataset): Discrete data.
        max_parents (int): Parent-set size limit, default 3.
    """

    def __init__(self, data: Dataset, max_parents: int = 3):
        if max_parents < 0:
            raise ValueError(f"max_parents must be >= 0, got {max_parents}")
        if data.n == 0:
            raise EmptyInput("hill climbing needs at least one data row")
        self.data = data
        self.max_parents = max_parents
        self._cache: Dict[Tuple[int, Tuple[int, ...]], float] = {}

    def local_score(self, i: int, parents) -> float:
        """BIC of variable i given a parent set: LL - 0.5 log(n) * (n_i - 1) * q_i."""
        parents = tuple(sorted(parents))
        key = (i, parents)
        if key in self._cache:
            return self._cache[key]
        values = self.data.values
        cards = self.data.specs.cardinalities
        config = np.zeros(self.data.n, dtype=np.int64)
        q = 1
        for j in parents:
            config = config * cards[j] + values[:, j]
            q *= cards[j]
        counts = np.bincount(config * cards[i] + values[:, i], minlength=q * cards[i]).reshape(q, cards[i])
        ll = xlogy(counts, counts).sum() - xlogy(counts.sum(axis=1), counts.sum(axis=1)).sum()
        score = float(ll - 0.5 * np.log(self.data.n) * (cards[i] - 1) * q)
        self._cache[key] = score
        return score

    def _gains(self, adj: np.ndarray, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """Score change of child i from adding / deleting each candidate parent."""
        p = adj.shape[0]
        parents = set(np.flatnonzero(adj[:, i]).tolist())
        base = self.local_score(i, parents)
        add = np.full(p, -np.inf)
        delete = np.full(p, -np.inf)
        for j in range(p):
            if j == i:
                continue
            if j in parents:
                delete[j] = self.local_score(i, parents - {j}) - base
            elif len(parents) < self.max_parents:
                add[j] = self.local_score(i, parents | {j}) - base
        return add, delete

    def estimate_dag(self, max_iterations: int = 100000, epsilon: float = 1e-9) -> DagGraph:
        p = self.data.p
        adj = np.zeros((p, p), dtype=bool)
        add_gain = np.empty((p, p))
        del_gain = np.empty((p, p))
        for i in range(p):
            add_gain[:, i], del_gain[:, i] = self._gains(adj, i)

        for iteration in range(max_iterations):
            move = self._best_move(adj, add_gain, del_gain, epsilon)
            if move is None:
                logger.debug("hill climbing reached a local optimum after %d moves", iteration)
                break
            kind, j, i = move
            if kind == ADD:
                adj[j, i] = True
                changed = [i]
            elif kind == DELETE:
                adj[j, i] = False
                changed = [i]
            else:
                adj[j, i] = False
                adj[i, j] = True
                changed = [i, j]
            for k in changed:
                add_gain[:, k], del_gain[:, k] = self._gains(adj, k)
        return DagGraph(p, adj)

    def _best_move(self, adj, add_gain, del_gain, epsilon):
        reach = path_matrix(DagGraph(adj.shape[0], adj)).reach
        rev_gain = np.where(adj, del_gain + add_gain.T, -np.inf)
        candidates = []
        for kind, gain in ((ADD, add_gain), (DELETE, del_gain), (REVERSE, rev_gain)):
            for j, i in zip(*np.nonzero(gain > epsilon)):
                candidates.append((-gain[j, i], kind, int(j), int(i)))
        candidates.sort()
        graph = None
        for _, kind, j, i in candidates:
            if kind == ADD and reach[i, j]:
                continue
            if kind == REVERSE:
                # legal only if j -> i is the sole path from j to i
                graph = graph if graph is not None else to_networkx(DagGraph(adj.shape[0], adj))
                graph.remove_edge(j, i)
                blocked = nx.has_path(graph, j, i)
                graph.add_edge(j, i)
                if blocked:
                    continue
            return kind, j, i
        return None


def hc_baseline(d: Dataset, max_parents: int = 3) -> DagGraph:
    return HillClimbing(d, max_parents).estimate_dag()
