import numpy as np
import pytest

from backend.models.graph import DagGraph, path_matrix
from backend.models.multi_logit import Dataset, ParamSet, VariableSpec, predict_proba
from backend.models.score import (HyperParams, child_log_likelihood, child_objective, dag_penalty,
                                  fd_gradient, full_grad_ll, log_likelihood, sample_grad_ll,
                                  scaled_objective, sparsity_penalty, total_score)
from backend.utils.exceptions import ConfigError, EmptyInput, ShapeMismatch


def _random_graph(rng, p, density=0.3) -> DagGraph:
    adj = rng.random((p, p)) < density
    np.fill_diagonal(adj, False)
    return DagGraph(p, adj)


class TestHyperParams:
    def test_defaults(self):
        hp = HyperParams()
        assert (hp.lambda1, hp.lambda2, hp.gamma) == (1.0, 0.2, 0.1)
        assert (hp.loss_scale, hp.pm_source) == ('calibrated', 'acyclic')
        assert hp.epoch_length(50) == 50
        assert HyperParams(m=7).epoch_length(50) == 7

    @pytest.mark.parametrize("kwargs", [
        {'lambda1': -1.0},
        {'lambda2': -0.1},
        {'gamma': 0.0},
        {'m': -1},
        {'sweeps': 0},
        {'tol': -1e-3},
        {'loss_scale': 'median'},
        {'pm_source': 'cyclic'},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            HyperParams(**kwargs)

    def test_likelihood_scale(self):
        assert HyperParams(loss_scale='sum').likelihood_scale(100, 5) == 1.0
        assert HyperParams(loss_scale='sqrt').likelihood_scale(100, 5) == pytest.approx(0.1)
        assert HyperParams(loss_scale='mean').likelihood_scale(100, 5) == pytest.approx(0.01)

    @pytest.mark.parametrize("loss_scale", ['sum', 'sqrt', 'mean', 'calibrated'])
    def test_penalty_scale_matches_likelihood_scale(self, loss_scale):
        hp = HyperParams(loss_scale=loss_scale)
        assert hp.penalty_scale(100, 20) * hp.likelihood_scale(100, 20) * 100 == pytest.approx(1.0)
        assert HyperParams(loss_scale='sqrt').penalty_scale(100, 20) == pytest.approx(0.1)

    @pytest.mark.parametrize("n, p, threshold", [
        (50, 50, np.sqrt(2 * np.log(50))),
        (50, 200, np.sqrt(2 * np.log(200))),
        (2000, 5, np.sqrt(np.log(2000))),
        (1, 1, 1.0),
    ])
    def test_calibrated_threshold(self, n, p, threshold):
        # zero-block test in standard errors of a balanced binary gradient
        s = HyperParams(loss_scale='calibrated').penalty_scale(n, p)
        assert s * 2 * np.sqrt(2) * np.sqrt(n) == pytest.approx(threshold)

    def test_calibrated_grows_with_p_and_shrinks_with_n(self):
        hp = HyperParams(loss_scale='calibrated')
        assert hp.penalty_scale(50, 200) > hp.penalty_scale(50, 50)
        assert hp.penalty_scale(500, 50) < hp.penalty_scale(50, 50)


class TestLogLikelihood:
    def test_uniform_model(self, rng, make_dataset):
        d = make_dataset(VariableSpec.binary(4), 25, rng)
        assert log_likelihood(ParamSet.zeros(d.specs), d) == pytest.approx(25 * 4 * np.log(0.5))

    def test_single_cell(self):
        d = Dataset(np.array([[0]]), VariableSpec.binary(1))
        assert log_likelihood(ParamSet.zeros(d.specs), d) == pytest.approx(-0.6931, abs=1e-4)

    def test_matches_probability_product(self, rng, make_params, make_dataset):
        specs = VariableSpec((2, 3, 2))
        params = make_params(specs, rng)
        d = make_dataset(specs, 15, rng)
        expected = sum(np.log(predict_proba(params, i, d.design[h])[d.values[h, i]])
                       for h in range(d.n) for i in range(d.p))
        ll = log_likelihood(params, d)
        assert ll == pytest.approx(expected, abs=1e-10)
        assert ll <= 0

    def test_decomposes_per_child(self, rng, make_params, make_dataset):
        specs = VariableSpec.binary(4)
        params = make_params(specs, rng)
        d = make_dataset(specs, 20, rng)
        parts = [child_log_likelihood(params, d, i) for i in range(4)]
        assert log_likelihood(params, d) == sum(parts)

    def test_layout_mismatch(self, rng, make_dataset):
        d = make_dataset(VariableSpec((2, 3)), 5, rng)
        with pytest.raises(ShapeMismatch):
            log_likelihood(ParamSet.zeros(VariableSpec.binary(2)), d)


class TestPenalties:
    def test_sparsity_zero(self):
        assert sparsity_penalty(ParamSet.zeros(VariableSpec.binary(3)), 1.0) == 0.0

    def test_sparsity_single_block(self):
        params = ParamSet.zeros(VariableSpec.binary(3))
        params.set_block(2, 0, np.array([[3.0], [-4.0]]))
        assert sparsity_penalty(params, 1.0) == pytest.approx(5.0)
        assert sparsity_penalty(params, 2.0) == pytest.approx(10.0)

    def test_intercepts_not_penalized(self):
        params = ParamSet.zeros(VariableSpec.binary(2))
        params.set_intercept(0, [5.0, -5.0])
        assert sparsity_penalty(params, 1.0) == 0.0

    def test_dag_penalty_empty_path_matrix(self, rng, make_params):
        params = make_params(VariableSpec.binary(4), rng)
        assert dag_penalty(params, path_matrix(DagGraph.empty(4)), 0.2) == 0.0

    def test_dag_penalty_two_cycle_candidate(self):
        # path 0 -> 1 exists, so beta_{0.1} (edge 1 -> 0) would close a cycle
        params = ParamSet.zeros(VariableSpec.binary(2))
        params.set_block(0, 1, np.array([[3.0], [-4.0]]))
        pm = path_matrix(DagGraph.from_edges(2, [(0, 1)]))
        assert dag_penalty(params, pm, 0.2) == pytest.approx(1.0)

    def test_dag_penalty_ignores_consistent_edges(self):
        params = ParamSet.zeros(VariableSpec.binary(2))
        params.set_block(1, 0, np.array([[3.0], [-4.0]]))
        pm = path_matrix(DagGraph.from_edges(2, [(0, 1)]))
        assert dag_penalty(params, pm, 0.2) == 0.0

    def test_dag_penalty_zero_iff_no_cycle_closing_block(self, rng, make_params):
        specs = VariableSpec.binary(5)
        for _ in range(50):
            params = make_params(specs, rng)
            for i in range(5):
                for j in range(5):
                    if i != j and rng.random() < 0.6:
                        params.set_block(i, j, 0.0)
            pm = path_matrix(_random_graph(rng, 5))
            offending = any(pm.cycle_closing(i, j) and params.block_norm(i, j) > 0
                            for i in range(5) for j in range(5) if i != j)
            assert (dag_penalty(params, pm, 0.2) > 0) == offending

    def test_block_homogeneity(self, rng, make_params):
        params = make_params(VariableSpec.binary(3), rng)
        pm = path_matrix(DagGraph.from_edges(3, [(0, 1), (1, 2)]))
        scaled = params.copy()
        scaled.set_block(0, 2, 3.0 * params.block(0, 2))
        extra = 2.0 * params.block_norm(0, 2)
        assert sparsity_penalty(scaled, 1.0) == pytest.approx(sparsity_penalty(params, 1.0) + extra)
        assert dag_penalty(scaled, pm, 1.0) == pytest.approx(dag_penalty(params, pm, 1.0) + extra)


class TestTotalScore:
    def test_zero_params(self, rng, make_dataset):
        d = make_dataset(VariableSpec.binary(3), 10, rng)
        score = total_score(ParamSet.zeros(d.specs), d, path_matrix(DagGraph.empty(3)), HyperParams())
        assert score.total == pytest.approx(-10 * 3 * np.log(0.5))
        assert score.sparsity_pen == 0.0 and score.dag_pen == 0.0

    def test_parts_recombine(self, rng, make_params, make_dataset):
        specs = VariableSpec.binary(4)
        d = make_dataset(specs, 12, rng)
        score = total_score(make_params(specs, rng), d, path_matrix(_random_graph(rng, 4)), HyperParams())
        assert score.total - score.sparsity_pen - score.dag_pen == pytest.approx(score.neg_ll, abs=1e-12)

    def test_child_objectives_sum_to_total(self, rng, make_params, make_dataset):
        specs = VariableSpec((2, 3, 2, 2))
        hp = HyperParams(lambda1=0.7, lambda2=0.4)
        for _ in range(10):
            params = make_params(specs, rng)
            d = make_dataset(specs, 15, rng)
            pm = path_matrix(_random_graph(rng, 4, density=0.4))
            total = sum(child_objective(params, d, pm, hp, i) for i in range(4))
            assert total == pytest.approx(total_score(params, d, pm, hp).total, rel=1e-12)

    def test_scaled_objective(self, rng, make_params, make_dataset):
        specs = VariableSpec.binary(3)
        params = make_params(specs, rng)
        d = make_dataset(specs, 16, rng)
        pm = path_matrix(DagGraph.empty(3))
        score = total_score(params, d, pm, HyperParams())
        assert scaled_objective(params, d, pm, HyperParams(loss_scale='sum')) == pytest.approx(score.total)
        assert scaled_objective(params, d, pm, HyperParams(loss_scale='sqrt')) == pytest.approx(
            score.neg_ll / 4 + score.sparsity_pen + score.dag_pen)
        hp = HyperParams(loss_scale='mean')
        assert scaled_objective(params, d, pm, hp, score=score) == scaled_objective(params, d, pm, hp)

    def test_permutation_covariance(self, rng, make_params, make_dataset):
        p = 4
        specs = VariableSpec.binary(p)
        params = make_params(specs, rng)
        d = make_dataset(specs, 20, rng)
        g = _random_graph(rng, p, density=0.4)
        hp = HyperParams(lambda1=0.5, lambda2=0.3)

        idx = rng.permutation(p)          # new variable k is old variable idx[k]
        perm = np.argsort(idx)            # old node a becomes perm[a]
        columns = [0] + [1 + int(a) for a in idx]
        coef = [params.coef[int(a)][:, columns] for a in idx]
        moved = total_score(ParamSet(specs, coef), Dataset(d.values[:, idx], specs),
                            path_matrix(g.relabel(perm)), hp)
        original = total_score(params, d, path_matrix(g), hp)
        assert moved.neg_ll == pytest.approx(original.neg_ll, rel=1e-12)
        assert moved.sparsity_pen == pytest.approx(original.sparsity_pen, rel=1e-12)
        assert moved.dag_pen == pytest.approx(original.dag_pen, rel=1e-12, abs=1e-12)


class TestGradients:
    def test_sample_gradient_at_zero(self):
        d = Dataset(np.array([[1, 1]]), VariableSpec.binary(2))
        grad = sample_grad_ll(ParamSet.zeros(d.specs), d, 1, 0)
        # column 1 is parent 0, column 2 is the child's own (zeroed) column
        np.testing.assert_allclose(grad[:, 1], [0.5, -0.5])
        np.testing.assert_allclose(grad[:, 0], [0.5, -0.5])
        np.testing.assert_array_equal(grad[:, 2], 0.0)

    def test_perfect_prediction(self):
        d = Dataset(np.array([[1, 0]]), VariableSpec.binary(2))
        params = ParamSet.zeros(d.specs)
        params.set_intercept(0, [-50.0, 50.0])
        np.testing.assert_allclose(sample_grad_ll(params, d, 0, 0), 0.0, atol=1e-12)

    def test_full_gradient_single_row(self, rng, make_params, make_dataset):
        specs = VariableSpec((2, 3, 2))
        params = make_params(specs, rng)
        d = make_dataset(specs, 1, rng)
        for i in range(3):
            np.testing.assert_allclose(full_grad_ll(params, d, i), sample_grad_ll(params, d, i, 0), atol=1e-12)

    def test_full_gradient_is_mean_invariant(self, rng, make_params, make_dataset):
        specs = VariableSpec.binary(3)
        params = make_params(specs, rng)
        d = make_dataset(specs, 9, rng)
        doubled = Dataset(np.vstack([d.values, d.values]), specs)
        np.testing.assert_allclose(full_grad_ll(params, doubled, 1), full_grad_ll(params, d, 1), rtol=1e-12, atol=1e-12)

    def test_full_gradient_empty(self):
        d = Dataset(np.zeros((0, 2), dtype=int), VariableSpec.binary(2))
        with pytest.raises(EmptyInput):
            full_grad_ll(ParamSet.zeros(d.specs), d, 0)

    def test_full_gradient_matches_finite_differences(self, rng, make_params, make_dataset):
        for _ in range(50):
            p = int(rng.integers(2, 6))
            n = int(rng.integers(1, 21))
            specs = VariableSpec.binary(p)
            params = make_params(specs, rng)
            d = make_dataset(specs, n, rng)
            for i in range(p):
                numeric = fd_gradient(lambda ps: -child_log_likelihood(ps, d, i) / d.n, params, 1e-5, child=i)[i]
                np.testing.assert_allclose(full_grad_ll(params, d, i), numeric, rtol=1e-5, atol=1e-8)

    def test_sample_gradient_matches_finite_differences(self, rng, make_params, make_dataset):
        specs = VariableSpec((3, 2, 2))
        params = make_params(specs, rng)
        d = make_dataset(specs, 10, rng)
        for h in range(d.n):
            row = Dataset(d.values[h:h + 1], specs)
            for i in range(3):
                numeric = fd_gradient(lambda ps: -child_log_likelihood(ps, row, i), params, 1e-5, child=i)[i]
                np.testing.assert_allclose(sample_grad_ll(params, d, i, h), numeric, rtol=1e-5, atol=1e-8)


class TestFdGradient:
    def test_quadratic(self, rng, make_params):
        params = make_params(VariableSpec.binary(3), rng)
        grads = fd_gradient(lambda ps: 0.5 * sum(float((c ** 2).sum()) for c in ps.coef), params)
        for g, c in zip(grads, params.coef):
            np.testing.assert_allclose(g, c, atol=1e-8)

    def test_linear(self, rng, make_params):
        specs = VariableSpec.binary(3)
        weights = make_params(specs, rng)
        grads = fd_gradient(lambda ps: sum(float((w * c).sum()) for w, c in zip(weights.coef, ps.coef)),
                            make_params(specs, rng))
        for g, w in zip(grads, weights.coef):
            np.testing.assert_allclose(g, w, atol=1e-9)

    def test_leaves_original_untouched(self, rng, make_params):
        params = make_params(VariableSpec.binary(2), rng)
        before = params.copy()
        fd_gradient(lambda ps: float(ps.coef[0].sum()), params)
        assert params == before

    def test_step_must_be_positive(self, rng, make_params):
        with pytest.raises(ValueError):
            fd_gradient(lambda ps: 0.0, make_params(VariableSpec.binary(2), rng), step=0.0)
