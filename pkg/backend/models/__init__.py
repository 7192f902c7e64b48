"""
Models module: graphs, the multi-logit model, the penalized score, the SVRCD
optimizer, the hill-climbing baseline and recovery metrics.
"""

from backend.models.SVRCD import LearnResult, SVRCDLearner, run
from backend.models.graph import DagGraph, PathMatrix, path_matrix
from backend.models.hill_climbing import HillClimbing, hc_baseline
from backend.models.metrics import MetricsReport, aggregate, evaluate
from backend.models.multi_logit import Dataset, ParamSet, VariableSpec
from backend.models.score import HyperParams, ScoreValue, total_score

__all__ = [
    'DagGraph', 'PathMatrix', 'path_matrix',
    'Dataset', 'ParamSet', 'VariableSpec',
    'HyperParams', 'ScoreValue', 'total_score',
    'LearnResult', 'SVRCDLearner', 'run',
    'HillClimbing', 'hc_baseline',
    'MetricsReport', 'aggregate', 'evaluate',
]
