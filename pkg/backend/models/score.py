"""
Penalized multi-logit log-likelihood score and its gradients.

The score minimized by the optimizer is

    f(beta) = -LL(beta) + lambda1 * sum_{i != j} ||beta_{i.j}||
                        + lambda2 * sum_{i != j} cyc(i, j) * ||beta_{i.j}||

where cyc(i, j) is 1 when a directed path i -> j exists, i.e. when the edge
j -> i encoded by beta_{i.j} would close a cycle. Intercepts are never
penalized. Gradients are of the minimized (negative log-likelihood) part.
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.special import logsumexp, softmax

from backend.models.graph import PathMatrix
from backend.models.multi_logit import Dataset, ParamSet
from backend.utils.config import DEFAULT_HYPERPARAMS, LOSS_SCALES, PM_SOURCES
from backend.utils.exceptions import ConfigError, EmptyInput


@dataclass
class HyperParams:
    lambda1: float = DEFAULT_HYPERPARAMS['lambda1']
    lambda2: float = DEFAULT_HYPERPARAMS['lambda2']
    gamma: float = DEFAULT_HYPERPARAMS['gamma']
    m: Optional[int] = DEFAULT_HYPERPARAMS['m']
    sweeps: int = DEFAULT_HYPERPARAMS['sweeps']
    tol: float = DEFAULT_HYPERPARAMS['tol']
    tau: float = DEFAULT_HYPERPARAMS['tau']
    loss_scale: str = DEFAULT_HYPERPARAMS['loss_scale']
    full_batch: bool = DEFAULT_HYPERPARAMS['full_batch']
    screening: bool = DEFAULT_HYPERPARAMS['screening']
    pm_source: str = DEFAULT_HYPERPARAMS['pm_source']

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError(f"lambda1 and lambda2 must be >= 0, got {self.lambda1}, {self.lambda2}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.m is not None and self.m < 0:
            raise ConfigError(f"m must be >= 0, got {self.m}")
        if self.sweeps < 1:
            raise ConfigError(f"sweeps must be >= 1, got {self.sweeps}")
        if self.tol < 0 or self.tau < 0:
            raise ConfigError(f"tol and tau must be >= 0, got {self.tol}, {self.tau}")
        if self.loss_scale not in LOSS_SCALES:
            raise ConfigError(f"loss_scale must be one of {LOSS_SCALES}, got {self.loss_scale!r}")
        if self.pm_source not in PM_SOURCES:
            raise ConfigError(f"pm_source must be one of {PM_SOURCES}, got {self.pm_source!r}")

    def epoch_length(self, n: int) -> int:
        return n if self.m is None else self.m

    def likelihood_scale(self, n: int, p: int) -> float:
        """
        Factor c_n applied to -LL in the minimized objective.

        'calibrated' sets c_n = 2 * sqrt(2) / (t * sqrt(n)) with
        t = max(sqrt(2 log p), sqrt(log n), 1). For balanced binary data a zero
        block then stays zero at lambda1 = 1 unless its likelihood gradient
        exceeds t standard errors: the universal threshold over p variables or
        the BIC cut for one parameter, whichever is larger.
        """
        if self.loss_scale == 'sum':
            return 1.0
        if self.loss_scale == 'sqrt':
            return 1.0 / np.sqrt(n)
        if self.loss_scale == 'mean':
            return 1.0 / n
        t = max(np.sqrt(2.0 * np.log(max(p, 1))), np.sqrt(np.log(max(n, 1))), 1.0)
        return 2.0 * np.sqrt(2.0) / (t * np.sqrt(n))

    def penalty_scale(self, n: int, p: int) -> float:
        """
        Penalty weight relative to the mean negative log-likelihood.

        The optimizer steps on -LL / n + penalty_scale(n, p) * penalties, which
        is the scaled objective divided by c_n * n and so has the same minimizers.
        """
        return 1.0 / (self.likelihood_scale(n, p) * n)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScoreValue:
    neg_ll: float
    sparsity_pen: float
    dag_pen: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'total', self.neg_ll + self.sparsity_pen + self.dag_pen)


def child_log_likelihood(params: ParamSet, d: Dataset, i: int) -> float:
    """Log-likelihood contribution of variable i over all rows."""
    logits = d.design @ params.coef[i].T
    observed = logits[np.arange(d.n), d.values[:, i]]
    return float(np.sum(observed - logsumexp(logits, axis=1)))


def log_likelihood(params: ParamSet, d: Dataset) -> float:
    params.check_layout(d.specs)
    return sum(child_log_likelihood(params, d, i) for i in range(d.p))


def sparsity_penalty(params: ParamSet, lambda1: float) -> float:
    return float(lambda1 * params.edge_norms().sum())


def dag_penalty(params: ParamSet, pm: PathMatrix, lambda2: float) -> float:
    # reach[i, j] gates beta_{i.j}, stored at edge_norms()[j, i]
    norms = params.edge_norms()
    return float(lambda2 * np.sum(pm.reach * norms.T))


def total_score(params: ParamSet, d: Dataset, pm: PathMatrix, hp: HyperParams) -> ScoreValue:
    return ScoreValue(
        neg_ll=-log_likelihood(params, d),
        sparsity_pen=sparsity_penalty(params, hp.lambda1),
        dag_pen=dag_penalty(params, pm, hp.lambda2),
    )


def scaled_objective(params: ParamSet, d: Dataset, pm: PathMatrix, hp: HyperParams,
                     score: Optional[ScoreValue] = None) -> float:
    """
    The objective the optimizer minimizes (see HyperParams.loss_scale).

    ``score`` may carry an already computed total_score of the same inputs.
    """
    if score is None:
        score = total_score(params, d, pm, hp)
    return hp.likelihood_scale(d.n, d.p) * score.neg_ll + score.sparsity_pen + score.dag_pen


def child_objective(params: ParamSet, d: Dataset, pm: PathMatrix, hp: HyperParams, i: int) -> float:
    """Per-child block objective; summing it over every child gives total_score().total."""
    norms = params.edge_norms()[:, i]
    penalty = hp.lambda1 * norms.sum() + hp.lambda2 * np.sum(pm.reach[i, :] * norms)
    return -child_log_likelihood(params, d, i) + float(penalty)


def _zero_own_columns(grad: np.ndarray, params: ParamSet, i: int) -> np.ndarray:
    grad[:, params.specs.columns(i)] = 0.0
    return grad


def sample_grad_ll(params: ParamSet, d: Dataset, i: int, h: int) -> np.ndarray:
    """
    Gradient of the row-h negative log-likelihood of child i.

    Returns an n_i x (1 + D) matrix laid out like ``params.coef[i]``: column 0
    is the intercept, ``params.specs.columns(j)`` is the block for parent j.
    """
    x = d.design[h]
    y = np.zeros(d.specs.cardinalities[i])
    y[d.values[h, i]] = 1.0
    prob = softmax(params.coef[i] @ x)
    return _zero_own_columns(-np.outer(y - prob, x), params, i)


def full_grad_ll(params: ParamSet, d: Dataset, i: int) -> np.ndarray:
    """Mean of sample_grad_ll over all rows."""
    if d.n == 0:
        raise EmptyInput("cannot average gradients over an empty dataset")
    x = d.design
    prob = softmax(x @ params.coef[i].T, axis=1)
    grad = -(d.onehot(i) - prob).T @ x / d.n
    return _zero_own_columns(grad, params, i)


def fd_gradient(objective: Callable[[ParamSet], float], params: ParamSet, step: float = 1e-5,
                child: Optional[int] = None) -> List[np.ndarray]:
    """
    Central finite-difference gradient of ``objective`` w.r.t. every coefficient.

    Returns one array per child shaped like ``params.coef[i]``; the columns of
    a child's own variable (fixed at zero) get zero. With ``child`` set only
    that child's coefficients are perturbed, the others are left zero.
    """
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    work = params.copy()
    grads = [np.zeros_like(c) for c in params.coef]
    children = range(params.p) if child is None else [child]
    for i in children:
        own = params.specs.columns(i)
        own_cols = set(range(own.start, own.stop))
        coef = work.coef[i]
        for row in range(coef.shape[0]):
            for col in range(coef.shape[1]):
                if col in own_cols:
                    continue
                saved = coef[row, col]
                coef[row, col] = saved + step
                upper = objective(work)
                coef[row, col] = saved - step
                lower = objective(work)
                coef[row, col] = saved
                grads[i][row, col] = (upper - lower) / (2.0 * step)
    return grads
