"""
Bayesian-network structure learning from discrete data.

A multi-logit model scores each variable given its parents; group-lasso and
DAG penalties are minimized by SVRCD, a block-coordinate sweep where each
coefficient block gets one variance-reduced stochastic gradient epoch.
"""

from backend.models.SVRCD import SVRCDLearner, run
from backend.models.graph import DagGraph
from backend.models.multi_logit import Dataset, VariableSpec
from backend.models.score import HyperParams
from backend.utils.config import DEFAULT_HYPERPARAMS

__version__ = "0.1.0"
