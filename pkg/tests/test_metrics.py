import numpy as np
import pytest

from backend.models.generators import gen_random_dag
from backend.models.graph import DagGraph
from backend.models.metrics import MetricsReport, aggregate, evaluate, reports_to_frame
from backend.utils.config import METRIC_COLUMNS
from backend.utils.exceptions import EmptyInput, NodeCountMismatch


def _assert_identities(report: MetricsReport):
    assert report.P == pytest.approx(report.E + report.R + report.FP)
    assert report.s0 == pytest.approx(report.E + report.R + report.M)
    assert report.SHD == pytest.approx(report.R + report.M + report.FP)
    if report.s0:
        assert report.TPR == pytest.approx(report.E / report.s0)
    if report.P:
        assert report.FDR == pytest.approx((report.R + report.FP) / report.P)
    union = report.P + report.s0 - report.E
    assert report.JI == (pytest.approx(report.E / union) if union else 0.0)


class TestFromCounts:
    def test_averaged_counts(self):
        report = MetricsReport.from_counts(P=36.8, E=26.6, R=6.4, s0=50).round(2)
        assert (report.M, report.FP, report.TPR, report.FDR, report.SHD, report.JI) == \
            (17.0, 3.8, 0.53, 0.28, 27.2, 0.44)

    def test_zero_denominators(self):
        report = MetricsReport.from_counts(P=0, E=0, R=0, s0=0)
        assert (report.TPR, report.FDR, report.JI, report.SHD) == (0.0, 0.0, 0.0, 0)


class TestEvaluate:
    def test_perfect_recovery(self):
        truth = gen_random_dag(10, seed=1)
        report = evaluate(truth, truth)
        assert (report.E, report.R, report.FP, report.M, report.SHD) == (10, 0, 0, 0, 0)
        assert report.TPR == report.JI == 1.0
        assert report.FDR == 0.0

    def test_empty_estimate(self):
        truth = gen_random_dag(50, s0=50, seed=0)
        report = evaluate(DagGraph.empty(50), truth)
        assert (report.P, report.M, report.SHD) == (0, 50, 50)
        assert report.TPR == report.JI == report.FDR == 0.0

    def test_reversed_edge(self):
        report = evaluate(DagGraph.from_edges(2, [(1, 0)]), DagGraph.from_edges(2, [(0, 1)]))
        assert (report.P, report.E, report.R, report.FP, report.M, report.SHD) == (1, 0, 1, 0, 0, 1)
        assert report.FDR == 1.0

    def test_false_positive(self, chain3):
        report = evaluate(DagGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)]), chain3)
        assert (report.E, report.FP, report.SHD) == (2, 1, 1)

    def test_node_count_mismatch(self, chain3):
        with pytest.raises(NodeCountMismatch):
            evaluate(DagGraph.empty(4), chain3)

    def test_identities_on_random_pairs(self):
        rng = np.random.default_rng(3)
        for seed in range(100):
            p = int(rng.integers(3, 12))
            truth = gen_random_dag(p, s0=int(rng.integers(0, p)), seed=seed)
            estimate = gen_random_dag(p, s0=int(rng.integers(0, p)), seed=seed + 1000)
            report = evaluate(estimate, truth)
            _assert_identities(report)
            assert report.JI <= report.TPR + 1e-12
            assert 0.0 <= report.FDR <= 1.0

    def test_relabel_invariance(self):
        rng = np.random.default_rng(5)
        for seed in range(20):
            truth = gen_random_dag(8, s0=8, seed=seed)
            estimate = gen_random_dag(8, s0=6, seed=seed + 50)
            perm = rng.permutation(8).tolist()
            assert evaluate(estimate.relabel(perm), truth.relabel(perm)) == evaluate(estimate, truth)


class TestAggregate:
    def test_single_report(self, chain3):
        report = evaluate(DagGraph.from_edges(3, [(1, 0)]), chain3)
        result = aggregate([report])
        assert result.count == 1
        assert result.mean == report
        assert all(v == 0.0 for v in result.variance.values())

    def test_mean_and_population_variance(self):
        reports = [MetricsReport.from_counts(P=10, E=0, R=0, s0=0),
                   MetricsReport.from_counts(P=20, E=0, R=0, s0=0)]
        result = aggregate(reports)
        assert result.mean.SHD == 15.0
        assert result.variance['SHD'] == 25.0
        assert result.variance['P'] == 25.0

    def test_identities_hold_on_the_mean(self):
        truth = gen_random_dag(10, seed=0)
        reports = [evaluate(gen_random_dag(10, s0=k, seed=k), truth) for k in range(2, 9)]
        _assert_identities(aggregate(reports).mean)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            aggregate([])


def test_reports_to_frame(chain3):
    reports = [evaluate(chain3, chain3), evaluate(DagGraph.empty(3), chain3)]
    table = reports_to_frame(reports)
    assert tuple(table.columns) == METRIC_COLUMNS
    assert len(table) == 2
    assert table['SHD'].tolist() == [0, 2]
