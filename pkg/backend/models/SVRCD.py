"""
SVRCD: block-coordinate sweeps where each coefficient block beta_{i.j} is
optimized by one variance-reduced stochastic gradient (SVRG) epoch.

Each inner step is a proximal step on the mean-scale objective

    beta_{i.j} <- prox(project(beta_{i.j} - gamma * v),
                       gamma * s_n * (lambda1 + lambda2 * cyc(i, j)))

with v = grad_h(beta) - grad_h(snapshot) + mu the variance-reduced direction,
s_n = HyperParams.penalty_scale(n, p) and the group soft-threshold handling both
penalties at once. -LL / n + s_n * penalties is the scaled objective
c_n * (-LL) + penalties divided by c_n * n, so both have the same minimizers.

A sweep visits every child once: its logits are computed when the visit
starts and shifted after every block update, so the snapshot gradient of an
epoch costs one product with the block's design columns. The path matrix used
for cyc(i, j) is refreshed at the start of every sweep.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from scipy.special import expit, softmax

from backend.models.graph import DagGraph, PathMatrix, path_matrix, to_networkx
from backend.models.multi_logit import Dataset, ParamSet, project_sum_zero
from backend.models.score import (HyperParams, ScoreValue, full_grad_ll, sample_grad_ll,
                                  scaled_objective, total_score)
from backend.utils.config import TRACE_COLUMNS
from backend.utils.exceptions import EmptyInput, NonFiniteUpdate

logger = logging.getLogger(__name__)

__all__ = [
    'OptimizerState', 'LearnResult', 'SweepRecord', 'SVRCDLearner', 'ChildLogits',
    'prox_group', 'project_sum_zero', 'snapshot_mean', 'variance_reduced_direction', 'svrg_epoch',
    'intercept_epoch', 'child_pass', 'sampled_block_steps', 'binary_block_steps', 'run',
    'extract_edges', 'repair_dag', 'acyclic_path_matrix', 'sweep_path_matrix', 'initial_params',
]

INTERCEPT = slice(0, 1)
SQRT2 = math.sqrt(2.0)


def prox_group(block: np.ndarray, threshold: float) -> np.ndarray:
    """Group soft-thresholding: max(0, 1 - threshold / ||block||) * block."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    block = np.asarray(block, dtype=float)
    norm = np.linalg.norm(block)
    if norm <= threshold or norm == 0.0:
        return np.zeros_like(block)
    return (1.0 - threshold / norm) * block


@dataclass
class SweepRecord:
    sweep: int
    score: ScoreValue
    objective: float
    edges: int


@dataclass
class OptimizerState:
    """
    Mutable optimizer state.

    ``snapshot`` is the SVRG anchor point and ``snapshot_grad_mean`` holds the
    snapshot's mean gradient per block, keyed by (child, parent) with parent
    None for intercepts.
    """
    params: ParamSet
    snapshot: ParamSet
    pm: PathMatrix
    rng: np.random.Generator
    snapshot_grad_mean: Dict[Tuple[int, Optional[int]], np.ndarray] = field(default_factory=dict)
    sweep: int = 0
    trace: List[SweepRecord] = field(default_factory=list)

    @classmethod
    def start(cls, params: ParamSet, seed=None, tau: float = 0.0) -> "OptimizerState":
        """``seed`` may also be a Generator, which is then used as is."""
        return cls(params=params, snapshot=params.copy(),
                   pm=path_matrix(extract_edges(params, tau)),
                   rng=np.random.default_rng(seed))


@dataclass
class LearnResult:
    graph: DagGraph
    params: ParamSet
    trace: List[SweepRecord]
    iterations: int
    wall_time: float
    removed_edges: List[Tuple[int, int]] = field(default_factory=list)

    def trace_frame(self) -> pd.DataFrame:
        rows = [(r.sweep, r.score.neg_ll, r.score.sparsity_pen, r.score.dag_pen, r.score.total, r.edges)
                for r in self.trace]
        return pd.DataFrame(rows, columns=list(TRACE_COLUMNS))


class ChildLogits:
    """
    Logits of one child over every data row under the current parameters.

    shift() keeps them in step with block updates.
    """

    def __init__(self, d: Dataset, params: ParamSet, i: int):
        self.y = d.onehot(i)
        self.z = d.design @ params.coef[i].T
        self._resid = None

    @property
    def resid(self) -> np.ndarray:
        """y - softmax(z), n x n_i."""
        if self._resid is None:
            self._resid = self.y - softmax(self.z, axis=1)
        return self._resid

    def shift(self, xb: np.ndarray, delta: np.ndarray):
        self.z += xb @ delta.T
        self._resid = None

    def block_grad(self, xb: np.ndarray) -> np.ndarray:
        """Mean gradient of the block with design columns ``xb``."""
        return -self.resid.T @ xb / len(self.y)

    def grad_at_zero(self, xb: np.ndarray, block: np.ndarray) -> np.ndarray:
        """Mean gradient of a block after setting it to zero, every other block unchanged."""
        z = self.z - xb @ block.T
        return -(self.y - softmax(z, axis=1)).T @ xb / len(self.y)

    def parent_grad_norms(self, d: Dataset) -> np.ndarray:
        """Norm of the mean gradient of every parent block, indexed by parent."""
        col_sq = ((self.resid.T @ d.design[:, 1:]) ** 2).sum(axis=0)
        return np.sqrt(np.add.reduceat(col_sq, d.specs.offsets - 1)) / len(self.y)


def snapshot_mean(snapshot: ParamSet, d: Dataset, i: int, j: Optional[int]) -> np.ndarray:
    """mu for block (i, j): the snapshot's full mean gradient restricted to that block."""
    cols = INTERCEPT if j is None else d.specs.columns(j)
    return full_grad_ll(snapshot, d, i)[:, cols]


def variance_reduced_direction(params: ParamSet, snapshot: ParamSet, mu: np.ndarray, d: Dataset,
                               i: int, j: int, h: int) -> np.ndarray:
    """v = grad_h(beta) - grad_h(snapshot) + mu restricted to block (i, j)."""
    cols = INTERCEPT if j is None else d.specs.columns(j)
    return (sample_grad_ll(params, d, i, h)[:, cols]
            - sample_grad_ll(snapshot, d, i, h)[:, cols] + mu)


def sampled_block_steps(beta_hat: np.ndarray, mu: np.ndarray, logits: ChildLogits, xb: np.ndarray,
                        rows: np.ndarray, gamma: float, threshold: float) -> np.ndarray:
    """Proximal SVRG steps on one block, one per drawn row; the snapshot is ``beta_hat``."""
    x_rows = xb[rows]
    y_rows = logits.y[rows]
    z_rows = logits.z[rows]
    active = x_rows.any(axis=1)
    # mu - grad_h(snapshot) for every drawn row
    offset = mu[None, :, :] + logits.resid[rows][:, :, None] * x_rows[:, None, :]
    beta = beta_hat.copy()
    for t in range(len(rows)):
        v = offset[t]
        if active[t]:
            x = x_rows[t]
            prob = softmax(z_rows[t] + (beta - beta_hat) @ x)
            v = v - np.outer(y_rows[t] - prob, x)
        beta = prox_group(project_sum_zero(beta - gamma * v), threshold)
    return beta


def binary_block_steps(beta_hat: np.ndarray, mu: np.ndarray, logits: ChildLogits, xb: np.ndarray,
                       rows: np.ndarray, gamma: float, threshold: float) -> np.ndarray:
    """
    sampled_block_steps for a 2 x 1 block: a binary child's intercept or its
    block for a binary parent.

    A centered 2 x 1 block is (-b, b), so every step reduces to a scalar
    update of b; its norm is sqrt(2) * |b| and the group soft-threshold turns
    into a scalar one at threshold / sqrt(2).
    """
    x = xb[rows, 0]
    gap = logits.z[rows, 1] - logits.z[rows, 0]
    offset = mu[1, 0] + logits.resid[rows, 1] * x
    y = logits.y[rows, 1]
    shrink = threshold / SQRT2
    b_hat = float(beta_hat[1, 0])
    b = b_hat
    for x_t, gap_t, y_t, v in zip(x.tolist(), gap.tolist(), y.tolist(), offset.tolist()):
        if x_t:
            v -= (y_t - float(expit(gap_t + 2.0 * (b - b_hat) * x_t))) * x_t
        u = b - gamma * v
        b = math.copysign(max(abs(u) - shrink, 0.0), u)
    return np.array([[-b], [b]])


def _store(state: OptimizerState, i: int, cols: slice, beta: np.ndarray):
    state.params.coef[i][:, cols] = beta
    state.snapshot.coef[i][:, cols] = beta


def _epoch(state: OptimizerState, d: Dataset, hp: HyperParams, i: int, j: Optional[int],
           logits: ChildLogits) -> bool:
    """Runs one epoch on block (i, j), j None meaning the intercept; True when the block changed."""
    m = hp.epoch_length(d.n)
    if m == 0:
        return False
    cols = INTERCEPT if j is None else d.specs.columns(j)
    weight = 0.0
    if j is not None:
        weight = (hp.lambda1 + hp.lambda2 * state.pm.cycle_closing(i, j)) * hp.penalty_scale(d.n, d.p)
    xb = d.design[:, cols]
    beta_hat = state.params.coef[i][:, cols].copy()
    mu = logits.block_grad(xb)
    state.snapshot_grad_mean[(i, j)] = mu

    if hp.screening and j is not None:
        nonzero = beta_hat.any()
        at_zero = logits.grad_at_zero(xb, beta_hat) if nonzero else mu
        if np.linalg.norm(at_zero) <= weight:
            # Zero is the block's minimizer with every other block held fixed.
            if nonzero:
                _store(state, i, cols, np.zeros_like(beta_hat))
                logits.shift(xb, -beta_hat)
            return nonzero

    threshold = hp.gamma * weight
    if hp.full_batch:
        beta = beta_hat.copy()
        for _ in range(m):
            z = logits.z + xb @ (beta - beta_hat).T
            v = -(logits.y - softmax(z, axis=1)).T @ xb / d.n
            beta = prox_group(project_sum_zero(beta - hp.gamma * v), threshold)
    else:
        rows = state.rng.integers(0, d.n, size=m)
        steps = binary_block_steps if beta_hat.shape == (2, 1) else sampled_block_steps
        beta = steps(beta_hat, mu, logits, xb, rows, hp.gamma, threshold)

    if not np.isfinite(beta).all():
        raise NonFiniteUpdate(f"block ({i}, {'intercept' if j is None else j}) became non-finite; "
                              f"gamma={hp.gamma} is probably too large")
    if np.array_equal(beta, beta_hat):
        return False
    _store(state, i, cols, beta)
    logits.shift(xb, beta - beta_hat)
    return True


def _fresh_logits(state: OptimizerState, d: Dataset, i: int) -> ChildLogits:
    state.snapshot.coef[i][:] = state.params.coef[i]
    return ChildLogits(d, state.params, i)


def svrg_epoch(state: OptimizerState, i: int, j: int, d: Dataset, hp: HyperParams) -> OptimizerState:
    """One SVRG epoch of m inner steps on block beta_{i.j}."""
    if i == j:
        raise ValueError("block (i, i) does not exist")
    _epoch(state, d, hp, i, j, _fresh_logits(state, d, i))
    return state


def intercept_epoch(state: OptimizerState, i: int, d: Dataset, hp: HyperParams) -> OptimizerState:
    """One unpenalized SVRG epoch on child i's intercept vector."""
    _epoch(state, d, hp, i, None, _fresh_logits(state, d, i))
    return state


def child_pass(state: OptimizerState, d: Dataset, hp: HyperParams, i: int) -> OptimizerState:
    """
    Child i's share of a sweep: the intercept epoch, then one epoch per parent
    block in parent order.

    Equivalent to intercept_epoch followed by svrg_epoch for every j != i up
    to rounding, but the logits are shifted rather than recomputed and zero
    blocks that screening keeps at zero are settled from one gradient product
    for all parents.
    """
    logits = _fresh_logits(state, d, i)
    _epoch(state, d, hp, i, None, logits)
    weights = (hp.lambda1 + hp.lambda2 * state.pm.reach[i]) * hp.penalty_scale(d.n, d.p)
    nonzero = state.params.child_block_norms(i) > 0
    grad_norms = None
    for j in range(d.p):
        if j == i:
            continue
        if hp.screening and not nonzero[j]:
            if grad_norms is None:
                grad_norms = logits.parent_grad_norms(d)
            if grad_norms[j] <= weights[j]:
                continue
        if _epoch(state, d, hp, i, j, logits):
            nonzero[j] = state.params.block(i, j).any()
            grad_norms = None
    return state


def extract_edges(params: ParamSet, tau: float = 1e-8) -> DagGraph:
    """Edge j -> i iff ||beta_{i.j}|| > tau."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return DagGraph(params.p, params.edge_norms() > tau)


def repair_dag(g: DagGraph, params: ParamSet) -> DagGraph:
    """
    Break every directed cycle by deleting its weakest edge.

    The weakest edge of a cycle is the one with the smallest block norm, ties
    broken by the smallest (child, parent) pair.
    """
    norms = params.edge_norms()
    graph = to_networkx(g)
    removed = []
    while True:
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            break
        j, i = min(((u, v) for u, v in cycle), key=lambda e: (norms[e[0], e[1]], e[1], e[0]))
        graph.remove_edge(j, i)
        removed.append((j, i))
    if removed:
        logger.warning("removed %d cycle-closing edge(s): %s", len(removed), removed)
    return g.with_edges_removed(removed)


def acyclic_path_matrix(params: ParamSet, tau: float = 1e-8) -> PathMatrix:
    """
    Reachability of the extracted graph with its cycles broken heaviest first.

    Edges are added by decreasing block norm, ties by smallest (child, parent),
    and an edge is skipped when it would close a cycle among those already
    added. Of a 2-cycle only the stronger direction survives, so the DAG
    penalty lands on the weaker one.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    norms = params.edge_norms()
    p = params.p
    reach = np.zeros((p, p), dtype=bool)
    parents, children = np.nonzero(norms > tau)
    for k in np.lexsort((parents, children, -norms[parents, children])):
        j, i = parents[k], children[k]
        if reach[i, j]:
            continue
        sources = reach[:, j].copy()
        sources[j] = True
        targets = reach[i].copy()
        targets[i] = True
        reach |= sources[:, None] & targets[None, :]
    reach.setflags(write=False)
    return PathMatrix(reach)


def sweep_path_matrix(params: ParamSet, hp: HyperParams) -> PathMatrix:
    """The path matrix a sweep uses for cyc(i, j), per HyperParams.pm_source."""
    if hp.pm_source == 'extracted':
        return path_matrix(extract_edges(params, hp.tau))
    return acyclic_path_matrix(params, hp.tau)


def initial_params(d: Dataset, rng: np.random.Generator) -> ParamSet:
    """Every coefficient uniform in (0, 1), then centered across levels."""
    params = ParamSet.zeros(d.specs)
    for i, c in enumerate(params.coef):
        c[:] = project_sum_zero(rng.uniform(0.0, 1.0, size=c.shape))
        c[:, d.specs.columns(i)] = 0.0
    return params


class SVRCDLearner:
    """
    Learns a DAG from discrete data with SVRCD.

    Args:
        hp (HyperParams, optional): Penalties, step size and stopping rule.
        seed: Seed for initialization and row sampling.
    """

    def __init__(self, hp: Optional[HyperParams] = None, seed=None):
        self.hp = hp or HyperParams()
        self.seed = seed

    def fit(self, d: Dataset, init: Optional[ParamSet] = None) -> LearnResult:
        if d.n < 1:
            raise EmptyInput("SVRCD needs at least one data row")
        if d.p < 2:
            raise ValueError(f"SVRCD needs at least two variables, got {d.p}")
        hp = self.hp
        start = time.perf_counter()
        rng = np.random.default_rng(self.seed)
        if init is None:
            params = initial_params(d, rng)
        else:
            init.check_layout(d.specs)
            params = init.copy()
        state = OptimizerState.start(params, seed=rng, tau=hp.tau)
        logger.info("SVRCD start: n=%d p=%d lambda1=%g lambda2=%g gamma=%g loss_scale=%s pm_source=%s",
                    d.n, d.p, hp.lambda1, hp.lambda2, hp.gamma, hp.loss_scale, hp.pm_source)

        previous = None
        converged = False
        for sweep in range(1, hp.sweeps + 1):
            state.sweep = sweep
            state.pm = sweep_path_matrix(state.params, hp)
            for i in range(d.p):
                child_pass(state, d, hp, i)

            score = total_score(state.params, d, state.pm, hp)
            objective = scaled_objective(state.params, d, state.pm, hp, score=score)
            edges = extract_edges(state.params, hp.tau).n_edges
            state.trace.append(SweepRecord(sweep, score, objective, edges))
            logger.debug("sweep %d: objective=%.6f neg_ll=%.4f edges=%d", sweep, objective, score.neg_ll, edges)
            if previous is not None and abs(previous - objective) <= hp.tol * abs(previous):
                converged = True
                break
            previous = objective

        if not converged:
            logger.warning("SVRCD stopped after the sweep limit (%d) without meeting tol=%g", hp.sweeps, hp.tol)
        extracted = extract_edges(state.params, hp.tau)
        graph = repair_dag(extracted, state.params)
        removed = sorted(set(extracted.edges()) - set(graph.edges()))
        for j, i in removed:
            state.params.set_block(i, j, 0.0)
        wall = time.perf_counter() - start
        logger.info("SVRCD done: %d sweeps, %d edges, %.2fs", state.sweep, graph.n_edges, wall)
        return LearnResult(graph=graph, params=state.params, trace=state.trace,
                           iterations=state.sweep, wall_time=wall, removed_edges=removed)


def run(d: Dataset, hp: Optional[HyperParams] = None, seed=None, init: Optional[ParamSet] = None) -> LearnResult:
    return SVRCDLearner(hp, seed).fit(d, init)
