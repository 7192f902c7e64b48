"""
Structure-recovery metrics.

P: estimated edges, E: correct direction, R: reversed, M: missing,
FP: not in the true skeleton, TPR = E/s0, FDR = (R+FP)/P,
SHD = R+M+FP, JI = E/(P+s0-E).
"""
from dataclasses import asdict, dataclass
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from backend.models.graph import DagGraph
from backend.utils.config import METRIC_COLUMNS
from backend.utils.exceptions import EmptyInput, NodeCountMismatch


@dataclass(frozen=True)
class MetricsReport:
    P: float
    E: float
    R: float
    M: float
    FP: float
    TPR: float
    FDR: float
    SHD: float
    JI: float
    s0: float

    @classmethod
    def from_counts(cls, P: float, E: float, R: float, s0: float) -> "MetricsReport":
        """Derive the remaining metrics from (possibly averaged) counts."""
        M = s0 - E - R
        FP = P - E - R
        union = P + s0 - E
        return cls(
            P=P, E=E, R=R, M=M, FP=FP,
            TPR=E / s0 if s0 else 0.0,
            FDR=(R + FP) / P if P else 0.0,
            SHD=R + M + FP,
            JI=E / union if union else 0.0,
            s0=s0,
        )

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_COLUMNS}

    def round(self, digits: int = 2) -> "MetricsReport":
        return MetricsReport(**{k: round(v, digits) for k, v in asdict(self).items()})


@dataclass(frozen=True)
class AggregateReport:
    mean: MetricsReport
    variance: Dict[str, float]
    count: int


def evaluate(estimated: DagGraph, truth: DagGraph) -> MetricsReport:
    if estimated.p != truth.p:
        raise NodeCountMismatch(f"estimated graph has {estimated.p} nodes, truth has {truth.p}")
    est, true = estimated.adj, truth.adj
    P = int(est.sum())
    E = int((est & true).sum())
    R = int((est & ~true & true.T).sum())
    return MetricsReport.from_counts(P, E, R, int(true.sum()))


def aggregate(reports: Sequence[MetricsReport]) -> AggregateReport:
    """
    Mean and population variance over replicates.

    The mean report recomputes TPR, FDR and JI from the averaged counts so the
    metric identities hold on the fractional averages.
    """
    if not reports:
        raise EmptyInput("cannot aggregate an empty list of reports")
    table = reports_to_frame(reports)
    mean = MetricsReport.from_counts(
        P=float(table['P'].mean()), E=float(table['E'].mean()),
        R=float(table['R'].mean()), s0=float(np.mean([r.s0 for r in reports])),
    )
    variance = {name: float(np.var(table[name].to_numpy(), ddof=0)) for name in METRIC_COLUMNS}
    return AggregateReport(mean=mean, variance=variance, count=len(reports))


def reports_to_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    return pd.DataFrame([r.as_dict() for r in reports], columns=list(METRIC_COLUMNS))
