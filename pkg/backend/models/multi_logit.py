"""
Discrete variables and the symmetric multi-logit conditional model.

Each variable X_i with n_i levels is dummy coded with d_i = n_i - 1 indicator
columns (level 0 is the reference and codes to all zeros). A data row is
stacked into one covariate vector ``[1, x_0, x_1, ..., x_{p-1}]``; child i's
coefficients form an n_i x (1 + D) matrix whose column 0 is the intercept and
whose column slice for variable j is the block beta_{i.j}.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import softmax

from backend.models.graph import DagGraph, topo_sort
from backend.utils.exceptions import LevelOutOfRange, ShapeMismatch


@dataclass(frozen=True)
class VariableSpec:
    """Per-variable level counts n_i (each at least 2)."""
    cardinalities: tuple

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cardinalities)
        if any(c < 2 for c in cards):
            raise ValueError(f"every variable needs at least 2 levels, got {cards}")
        object.__setattr__(self, 'cardinalities', cards)

    @classmethod
    def binary(cls, p: int) -> "VariableSpec":
        return cls((2,) * p)

    @property
    def p(self) -> int:
        return len(self.cardinalities)

    @property
    def dims(self) -> tuple:
        """Dummy dimension d_i = n_i - 1 of every variable."""
        return tuple(c - 1 for c in self.cardinalities)

    @cached_property
    def offsets(self) -> np.ndarray:
        """First design column of every variable (column 0 is the intercept)."""
        return 1 + np.concatenate(([0], np.cumsum(self.dims)[:-1])).astype(int)

    @property
    def width(self) -> int:
        return 1 + sum(self.dims)

    def columns(self, j: int) -> slice:
        start = int(self.offsets[j])
        return slice(start, start + self.dims[j])


def dummy_encode(value: int, n_levels: int) -> np.ndarray:
    """Reference coding: level 0 -> zeros, level l -> indicator at position l-1."""
    if not 0 <= value < n_levels:
        raise LevelOutOfRange(f"level {value} outside 0..{n_levels - 1}")
    x = np.zeros(n_levels - 1)
    if value > 0:
        x[value - 1] = 1.0
    return x


@dataclass(frozen=True, eq=False)
class Dataset:
    """n x p matrix of level indices with the variables' cardinalities."""
    values: np.ndarray
    specs: VariableSpec

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != self.specs.p:
            raise ShapeMismatch(f"expected an n x {self.specs.p} matrix, got shape {values.shape}")
        cards = np.asarray(self.specs.cardinalities)
        bad = (values < 0) | (values >= cards[None, :])
        if bad.any():
            h, i = map(int, np.argwhere(bad)[0])
            raise LevelOutOfRange(f"row {h}, column {i}: level {values[h, i]} outside 0..{cards[i] - 1}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @cached_property
    def design(self) -> np.ndarray:
        return encode_dataset(self)

    def onehot(self, i: int) -> np.ndarray:
        """n x n_i indicator matrix y_{hil}."""
        y = np.zeros((self.n, self.specs.cardinalities[i]))
        y[np.arange(self.n), self.values[:, i]] = 1.0
        return y

    @classmethod
    def from_frame(cls, df: pd.DataFrame, specs: Optional[VariableSpec] = None) -> "Dataset":
        values = df.to_numpy(dtype=np.int64)
        if specs is None:
            maxima = values.max(axis=0) if len(values) else np.zeros(values.shape[1], dtype=int)
            specs = VariableSpec(tuple(max(2, int(m) + 1) for m in maxima))
        return cls(values, specs)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=[f"x{k}" for k in range(self.p)])


def encode_dataset(d: Dataset) -> np.ndarray:
    """Stacked dummy design matrix, n x (1 + D), column 0 all ones."""
    specs = d.specs
    x = np.zeros((d.n, specs.width))
    x[:, 0] = 1.0
    rows = np.arange(d.n)
    for j in range(d.p):
        level = d.values[:, j]
        hit = level > 0
        x[rows[hit], specs.offsets[j] + level[hit] - 1] = 1.0
    return x


def project_sum_zero(block: np.ndarray) -> np.ndarray:
    """Center every column across the child levels (rows) so it sums to zero."""
    block = np.asarray(block, dtype=float)
    return block - block.mean(axis=0, keepdims=True)


class ParamSet:
    """
    The full coefficient set beta, one n_i x (1 + D) matrix per child.

    The columns belonging to the child itself are always zero.
    """

    def __init__(self, specs: VariableSpec, coef: Sequence[np.ndarray]):
        if len(coef) != specs.p:
            raise ShapeMismatch(f"expected {specs.p} coefficient matrices, got {len(coef)}")
        self.specs = specs
        self.coef: List[np.ndarray] = []
        for i, c in enumerate(coef):
            c = np.array(c, dtype=float)
            if c.shape != (specs.cardinalities[i], specs.width):
                raise ShapeMismatch(f"child {i}: expected shape "
                                    f"{(specs.cardinalities[i], specs.width)}, got {c.shape}")
            c[:, specs.columns(i)] = 0.0
            self.coef.append(c)

    @classmethod
    def zeros(cls, specs: VariableSpec) -> "ParamSet":
        return cls(specs, [np.zeros((c, specs.width)) for c in specs.cardinalities])

    @property
    def p(self) -> int:
        return self.specs.p

    def copy(self) -> "ParamSet":
        return ParamSet(self.specs, [c.copy() for c in self.coef])

    def block(self, i: int, j: int) -> np.ndarray:
        """beta_{i.j}, an n_i x d_j view."""
        return self.coef[i][:, self.specs.columns(j)]

    def set_block(self, i: int, j: int, value: np.ndarray):
        if i == j:
            raise ValueError("a variable cannot be its own parent")
        self.coef[i][:, self.specs.columns(j)] = value

    def intercept(self, i: int) -> np.ndarray:
        return self.coef[i][:, 0]

    def set_intercept(self, i: int, value: np.ndarray):
        self.coef[i][:, 0] = value

    def block_norm(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.block(i, j)))

    def child_block_norms(self, i: int) -> np.ndarray:
        """||beta_{i.j}||_2 for every j (zero at j = i)."""
        col_sq = (self.coef[i][:, 1:] ** 2).sum(axis=0)
        return np.sqrt(np.add.reduceat(col_sq, self.specs.offsets - 1))

    def edge_norms(self) -> np.ndarray:
        """p x p matrix W with W[j, i] = ||beta_{i.j}||_2 (aligned with adj)."""
        w = np.zeros((self.p, self.p))
        for i in range(self.p):
            w[:, i] = self.child_block_norms(i)
        return w

    def max_column_sum(self) -> float:
        """Largest violation of the sum-to-zero identifiability constraint."""
        return max(float(np.abs(c.sum(axis=0)).max()) for c in self.coef)

    def check_layout(self, specs: VariableSpec):
        if specs.cardinalities != self.specs.cardinalities:
            raise ShapeMismatch(f"parameter layout {self.specs.cardinalities} does not "
                                f"match data cardinalities {specs.cardinalities}")

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return (self.specs == other.specs
                and all(np.array_equal(a, b) for a, b in zip(self.coef, other.coef)))


def predict_proba(params: ParamSet, i: int, row: np.ndarray) -> np.ndarray:
    """P(X_i = l | x) for every level l, given a stacked covariate vector."""
    return softmax(params.coef[i] @ np.asarray(row, dtype=float))


def child_proba(params: ParamSet, i: int, design: np.ndarray) -> np.ndarray:
    """Row-wise predict_proba over a whole design matrix (n x n_i)."""
    return softmax(design @ params.coef[i].T, axis=1)


def param_count(specs: VariableSpec, g: DagGraph, model: str = 'multi_logit') -> int:
    cards = specs.cardinalities
    dims = specs.dims
    if model == 'product_multinomial':
        return int(sum(cards[i] * np.prod([cards[j] for j in g.parents(i)], dtype=np.int64)
                       for i in range(g.p)))
    if model == 'multi_logit':
        return int(sum((cards[i] - 1) + cards[i] * sum(dims[j] for j in g.parents(i))
                       for i in range(g.p)))
    raise ValueError(f"unknown model {model!r}, expected 'product_multinomial' or 'multi_logit'")


def gen_true_cpds(g: DagGraph, specs: VariableSpec, coef_low: float = 0.5,
                  coef_high: float = 1.5, seed=None) -> ParamSet:
    """
    Ground-truth multi-logit parameters for a graph.

    Every true edge j -> i gets entries of magnitude U[coef_low, coef_high]
    with random signs, centered across levels. Centering cancels entries that
    share a sign, so each column is then rescaled until its largest entry has
    a magnitude drawn from U[coef_low, coef_high] again; a binary child's
    column becomes (-a, a) with a in the range. Intercepts and non-edge blocks
    are zero.
    """
    if not coef_high > coef_low > 0:
        raise ValueError(f"need coef_high > coef_low > 0, got [{coef_low}, {coef_high}]")
    if specs.p != g.p:
        raise ShapeMismatch(f"graph has {g.p} nodes but specs describe {specs.p} variables")
    rng = np.random.default_rng(seed)
    params = ParamSet.zeros(specs)
    for j, i in g.edges():
        shape = (specs.cardinalities[i], specs.dims[j])
        magnitude = rng.uniform(coef_low, coef_high, size=shape)
        sign = rng.choice([-1.0, 1.0], size=shape)
        block = project_sum_zero(magnitude * sign)
        peak = np.abs(block).max(axis=0)
        target = rng.uniform(coef_low, coef_high, size=shape[1])
        params.set_block(i, j, block * (target / np.where(peak > 0, peak, 1.0)))
    return params


def _sample_levels(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(probs.shape[0])
    levels = (np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(levels, probs.shape[1] - 1)


def sample_dataset(g: DagGraph, params: ParamSet, n: int, seed=None) -> Dataset:
    """Ancestral sampling: variables drawn in topological order given their parents."""
    order = topo_sort(g)
    specs = params.specs
    rng = np.random.default_rng(seed)
    values = np.zeros((n, g.p), dtype=np.int64)
    design = np.zeros((n, specs.width))
    design[:, 0] = 1.0
    rows = np.arange(n)
    for i in order:
        cols = np.concatenate([[0]] + [np.arange(specs.width)[specs.columns(j)] for j in g.parents(i)])
        logits = design[:, cols] @ params.coef[i][:, cols].T
        level = _sample_levels(softmax(logits, axis=1), rng)
        values[:, i] = level
        hit = level > 0
        design[rows[hit], specs.offsets[i] + level[hit] - 1] = 1.0
    return Dataset(values, specs)


def inject_noise(d: Dataset, q: float, seed=None) -> Dataset:
    """
    Flip each cell with probability q.

    Binary cells are complemented; cells with more levels move to one of the
    other levels uniformly at random.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"noise fraction must be in [0, 1], got {q}")
    rng = np.random.default_rng(seed)
    cards = np.asarray(d.specs.cardinalities)
    flip = rng.random(d.values.shape) < q
    shift = rng.integers(1, cards[None, :], size=d.values.shape)
    values = np.where(flip, (d.values + shift) % cards[None, :], d.values)
    return Dataset(values, d.specs)
