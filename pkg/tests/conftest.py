import numpy as np
import pytest

from backend.models.graph import DagGraph
from backend.models.multi_logit import Dataset, ParamSet, VariableSpec, project_sum_zero


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def chain3():
    """0 -> 1 -> 2"""
    return DagGraph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def make_params():
    """Random centered coefficients for a given layout."""
    def _make(specs: VariableSpec, rng, scale: float = 1.0) -> ParamSet:
        coef = [project_sum_zero(rng.normal(scale=scale, size=(c, specs.width))) for c in specs.cardinalities]
        return ParamSet(specs, coef)
    return _make


@pytest.fixture
def make_dataset():
    """Uniform random levels for the given cardinalities."""
    def _make(specs: VariableSpec, n: int, rng) -> Dataset:
        cards = np.asarray(specs.cardinalities)
        values = (rng.random((n, specs.p)) * cards).astype(np.int64)
        return Dataset(values, specs)
    return _make
