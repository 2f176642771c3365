import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparda.relax import SolverError
from sparda.tighten import (SortCache, TightenConfig, insertion_sort, project_half_ball,
                            sorted_gradient_pass, tighten, truncate_topk)
from sparda.wasserstein import gradient, objective

vectors = arrays(float, st.integers(1, 6), elements=st.floats(-10, 10))


class TestProjectHalfBall:
    def test_inside(self):
        np.testing.assert_array_equal(project_half_ball([0.3, 0.4]), [0.3, 0.4])

    def test_rescale(self):
        np.testing.assert_allclose(project_half_ball([3.0, 4.0]), [0.6, 0.8])

    def test_rescale_and_flip(self):
        np.testing.assert_allclose(project_half_ball([-3.0, 4.0]), [0.6, -0.8])

    def test_zero(self):
        np.testing.assert_array_equal(project_half_ball(np.zeros(3)), 0.0)

    @given(vectors)
    def test_idempotent_and_feasible(self, beta):
        once = project_half_ball(beta)
        assert np.linalg.norm(once) <= 1 + 1e-9
        nz = np.flatnonzero(once)
        assert nz.size == 0 or once[nz[0]] > 0
        np.testing.assert_array_equal(project_half_ball(once), once)

    @settings(max_examples=30, deadline=None)
    @given(vectors, st.integers(0, 1000))
    def test_objective_invariance(self, beta, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((5, beta.size))
        Y = rng.standard_normal((4, beta.size))
        scaled = beta / max(1.0, np.linalg.norm(beta))
        assert objective(X, Y, project_half_ball(beta)) == pytest.approx(
            objective(X, Y, scaled), rel=1e-10, abs=1e-10)


class TestTruncateTopk:
    def test_identity(self):
        b = np.array([0.1, -0.7, 0.3])
        np.testing.assert_array_equal(truncate_topk(b, 3), b)

    def test_two_largest(self):
        np.testing.assert_array_equal(truncate_topk([0.9, -0.5, 0.1], 2),
                                      [0.9, -0.5, 0.0])

    def test_tie_lowest_index(self):
        np.testing.assert_array_equal(truncate_topk([0.5, 0.5, 0.5], 1),
                                      [0.5, 0.0, 0.0])

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            truncate_topk([1.0, 2.0], 0)

    @given(vectors, st.integers(1, 6))
    def test_support_and_idempotence(self, beta, k):
        k = min(k, beta.size)
        out = truncate_topk(beta, k)
        assert np.count_nonzero(out) == min(k, np.count_nonzero(beta))
        kept = np.abs(out[out != 0])
        dropped = np.abs(beta[out == 0])
        if kept.size and dropped.size:
            assert kept.min() >= dropped.max()
        np.testing.assert_array_equal(truncate_topk(out, k), out)


class TestInsertionSort:
    @settings(max_examples=100)
    @given(st.lists(st.integers(-3, 3), min_size=1, max_size=30), st.integers(0, 99))
    def test_equals_stable_argsort(self, vals, seed):
        values = np.array(vals, dtype=float)
        start = np.random.default_rng(seed).permutation(values.size)
        for budget in (None, 2):
            order, _ = insertion_sort(values, start, budget)
            np.testing.assert_array_equal(order, np.argsort(values, kind="stable"))

    def test_sorted_input_no_moves(self):
        values = np.array([0.1, 0.5, 0.3])
        order, swaps = insertion_sort(values, [0, 2, 1])
        assert swaps == 0
        np.testing.assert_array_equal(order, [0, 2, 1])

    def test_single_transposition(self):
        values = np.array([0.0, 2.0, 1.0, 3.0])
        order, swaps = insertion_sort(values, [0, 1, 2, 3])
        assert swaps == 1
        np.testing.assert_array_equal(order, [0, 2, 1, 3])


class TestSortedGradientPass:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.X = rng.standard_normal((30, 4))
        self.Y = rng.standard_normal((25, 4)) + 0.5
        self.beta = rng.standard_normal(4)

    def test_cold_matches_gradient(self):
        g, _ = sorted_gradient_pass(self.X, self.Y, self.beta)
        np.testing.assert_array_equal(g, gradient(self.X, self.Y, self.beta))

    def test_exact_cache(self):
        g0, cache = sorted_gradient_pass(self.X, self.Y, self.beta)
        g1, cache1 = sorted_gradient_pass(self.X, self.Y, self.beta, cache)
        assert cache1.swaps == 0
        np.testing.assert_array_equal(g0, g1)

    def test_one_transposition(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        Y = np.array([[0.5, 1.0], [2.5, -1.0]])
        beta = np.array([1.0, 0.0])
        _, cache = sorted_gradient_pass(X, Y, beta)
        # tilting beta swaps the two projected y values only
        moved = np.array([1.0, 1.2])
        g, new = sorted_gradient_pass(X, Y, moved, cache)
        assert new.swaps == 1
        np.testing.assert_allclose(g, gradient(X, Y, moved), atol=1e-12)

    def test_small_steps_track_cold_sort(self):
        rng = np.random.default_rng(1)
        beta = self.beta.copy()
        cache = None
        for _ in range(50):
            beta = beta + 0.01 * rng.standard_normal(4)
            g, cache = sorted_gradient_pass(self.X, self.Y, beta, cache)
            np.testing.assert_allclose(g, gradient(self.X, self.Y, beta), rtol=0,
                                       atol=1e-12)


class TestTighten:
    def test_fixed_point_point_masses(self):
        mu = np.array([1.0, 2.0, 0.0])
        X, Y = np.zeros((5, 3)), np.tile(mu, (5, 1))
        beta0 = mu / np.linalg.norm(mu)
        res = tighten(X, Y, beta0)
        np.testing.assert_allclose(res.beta, beta0, atol=1e-9)
        assert res.objective == pytest.approx(objective(X, Y, beta0), abs=1e-9)

    def test_duplicated_samples(self):
        X = np.random.default_rng(2).standard_normal((8, 3))
        beta0 = np.array([0.6, 0.0, 0.8])
        res = tighten(X, X.copy(), beta0)
        assert res.objective == 0.0
        np.testing.assert_array_equal(res.beta, beta0)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_feasible_and_monotone(self, seed, k):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((40, 4))
        Y = rng.standard_normal((35, 4)) * np.array([1.0, 2.0, 1.0, 0.5])
        beta0 = rng.standard_normal(4)
        res = tighten(X, Y, beta0, TightenConfig(k=k, max_iter=300))
        assert np.linalg.norm(res.beta) <= 1 + 1e-9
        assert np.count_nonzero(res.beta) <= k
        assert res.beta[np.flatnonzero(res.beta)[0]] > 0
        assert res.objective == pytest.approx(objective(X, Y, res.beta), abs=1e-12)
        start = truncate_topk(project_half_ball(beta0), k)
        assert res.objective >= objective(X, Y, start) - 1e-12
        assert res.objective == max(res.history)

    def test_finds_variance_direction(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((400, 3))
        Y = rng.standard_normal((400, 3)) * np.array([1.0, 1.0, 3.0])
        res = tighten(X, Y, np.ones(3) / np.sqrt(3))
        assert abs(res.beta[2]) >= 0.95

    def test_zero_start(self):
        with pytest.raises(SolverError):
            tighten(np.ones((3, 2)), np.zeros((3, 2)), np.zeros(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            tighten(np.ones((3, 2)), np.zeros((3, 2)), np.ones(3))

    def test_sort_cache_type(self):
        _, cache = sorted_gradient_pass(np.eye(2), np.eye(2), np.ones(2))
        assert isinstance(cache, SortCache)
