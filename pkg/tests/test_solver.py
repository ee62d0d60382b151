import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lp_oracle import exact_column_objectives, min_l1_objective, outlier_column_solution
from conftest import chain_instance, independent_instance

from ssc import AdmmConfig, DataMatrix, ProblemSpec, Variant, solve
from ssc.solver import (
    DegenerateScaleError,
    lasso_zero_threshold,
    mu_e,
    mu_z,
    prox_l1_plus_group,
    row_sparsity_norm,
    shrink,
    solve_l1_dictionary,
)

EXACT = ProblemSpec(variant=Variant.EXACT, normalize_columns=False)
FAST = AdmmConfig(rho=50.0)
TIGHT = AdmmConfig(rho=50.0, epsilon=1e-6, max_iter=100000)


class TestMuScales:
    def test_three_column_example(self):
        # enumeration oracle: all pairwise |<y_i, y_j>| by hand
        Y = np.array([[1.0, 0.0, 1 / math.sqrt(2)], [0.0, 1.0, 1 / math.sqrt(2)]])
        data = DataMatrix(Y)
        inner = np.abs(Y.T @ Y)
        np.fill_diagonal(inner, -1)
        expected = inner.max(axis=1).min()
        assert mu_z(data) == pytest.approx(expected)
        assert mu_z(data) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_identical_unit_columns(self):
        y = np.array([[0.6], [0.8]])
        assert mu_z(DataMatrix(np.hstack([y, y]))) == pytest.approx(1.0)

    def test_orthogonal_pair_degenerate(self):
        with pytest.raises(DegenerateScaleError):
            mu_z(DataMatrix(np.eye(2)))

    def test_mu_e_example(self):
        Y = np.array([[1.0, 0.0, 1 / math.sqrt(2)], [0.0, 1.0, 1 / math.sqrt(2)]])
        # l1 norms are (1, 1, sqrt 2); per-point maxima (sqrt2, sqrt2, 1)
        assert mu_e(DataMatrix(Y)) == pytest.approx(1.0)

    def test_mu_e_constant_norms(self):
        rng = np.random.default_rng(3)
        Y = rng.standard_normal((4, 6))
        Y *= 5.0 / np.abs(Y).sum(axis=0)
        assert mu_e(DataMatrix(Y)) == pytest.approx(5.0)

    def test_mu_e_degenerate(self):
        Y = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        with pytest.raises(DegenerateScaleError):
            mu_e(DataMatrix(Y))


class TestShrink:
    @pytest.mark.parametrize(
        "v,eta,expected",
        [(1.2, 0.5, 0.7), (-0.3, 0.5, 0.0), (-2.0, 0.5, -1.5), (0.0, 0.0, 0.0)],
    )
    def test_examples(self, v, eta, expected):
        assert shrink(v, eta) == pytest.approx(expected)

    def test_elementwise_on_matrices(self):
        M = np.array([[1.2, -0.3], [-2.0, 0.4]])
        np.testing.assert_allclose(shrink(M, 0.5), [[0.7, 0.0], [-1.5, 0.0]])

    @given(
        st.floats(min_value=-1e6, max_value=1e6),
        st.floats(min_value=0, max_value=1e6),
    )
    @settings(max_examples=200, deadline=None)
    def test_magnitude_and_sign(self, v, eta):
        out = float(shrink(v, eta))
        assert abs(out) == pytest.approx(max(abs(v) - eta, 0.0))
        assert out == 0.0 or np.sign(out) == np.sign(v)


class TestProxL1PlusGroup:
    def test_reduces_to_l1_prox_when_b_zero(self, rng):
        row = rng.standard_normal(6)
        np.testing.assert_allclose(
            prox_l1_plus_group(row, 0.3, 0.0), shrink(row, 0.3)
        )

    def test_pure_group_shrink(self):
        np.testing.assert_allclose(
            prox_l1_plus_group(np.array([3.0, 4.0]), 0.0, 1.0), [2.4, 3.2]
        )

    def test_l1_kills_small_rows(self):
        out = prox_l1_plus_group(np.array([0.4, 0.3]), 0.5, 1.0)
        np.testing.assert_array_equal(out, [0.0, 0.0])

    def test_group_step_kills_small_norm(self):
        out = prox_l1_plus_group(np.array([0.3, 0.4]), 0.0, 1.0)
        np.testing.assert_array_equal(out, [0.0, 0.0])


class TestRowSparsityNorm:
    def test_singleton_unit_rows(self):
        # k rows with one entry of magnitude 1 each: value k
        M = np.zeros((6, 6))
        for r, c in enumerate([3, 2, 5, 0, 1, 4]):
            M[r, c] = (-1.0) ** r
        assert row_sparsity_norm(M) == pytest.approx(6.0)

    def test_matches_row_l2_sums(self, rng):
        M = rng.standard_normal((5, 5))
        assert row_sparsity_norm(M) == pytest.approx(
            sum(np.linalg.norm(M[i]) for i in range(5))
        )

    def test_crossover_of_cosine_row_bound(self):
        # sum of row l2 norms of the 4-row pattern {1, 1/(2 sqrt2 cos t)}
        # equals sqrt(16 + 2/cos^2 t); it crosses 6 exactly at arctan(3).
        def row_value(theta):
            M = np.zeros((4, 8))
            for r in range(4):
                M[r, 2 * r] = 1.0
                M[r, 2 * r + 1] = 1.0 / (2 * math.sqrt(2) * math.cos(theta))
            return row_sparsity_norm(M)

        for theta in (0.3, 0.9, 1.2):
            assert row_value(theta) == pytest.approx(
                math.sqrt(16 + 2 / math.cos(theta) ** 2), abs=1e-12
            )
        lo, hi = 0.5, 1.5
        for _ in range(60):
            mid = (lo + hi) / 2
            if row_value(mid) < 6.0:
                lo = mid
            else:
                hi = mid
        assert (lo + hi) / 2 == pytest.approx(math.atan(3.0), abs=1e-9)


class TestLassoZeroThreshold:
    def test_orthogonal_point(self):
        Y = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]])
        Y /= np.linalg.norm(Y, axis=0)
        assert lasso_zero_threshold(DataMatrix(Y), 0) == 0.0

    def test_two_point_example(self):
        Y = np.array([[1.0, 0.8], [0.0, 0.6]])
        assert lasso_zero_threshold(DataMatrix(Y), 0) == pytest.approx(0.8)

    def test_solver_returns_zero_below_threshold(self):
        rng = np.random.default_rng(11)
        Y = rng.standard_normal((5, 9))
        Y /= np.linalg.norm(Y, axis=0)
        data = DataMatrix(Y)
        i = 2
        thr = lasso_zero_threshold(data, i)
        alpha = 0.9 * thr * mu_z(data)  # lambda_z = 0.9 * thr
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = ProblemSpec(variant=Variant.NOISE, alpha_z=alpha, normalize_columns=False)
        res = solve(data, spec, FAST)
        assert np.abs(res.coefficients.values[:, i]).sum() == 0.0


class TestSolveExamples:
    def test_two_segments_noise_variant(self):
        # y2 = 2 y1 and y4 = 3 y3; the only self-expression of y1 uses y2/2
        Y = np.array([[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 1.0, 3.0]])
        spec = ProblemSpec(variant=Variant.NOISE, alpha_z=800.0, normalize_columns=False)
        res = solve(DataMatrix(Y), spec, AdmmConfig())
        np.testing.assert_allclose(
            res.coefficients.values[:, 0], [0.0, 0.5, 0.0, 0.0], atol=1e-3
        )
        oracle = min_l1_objective(Y[:, 1:], Y[:, 0])
        assert np.abs(res.coefficients.values[:, 0]).sum() == pytest.approx(
            oracle, rel=2e-3
        )

    def test_identical_points_affine(self):
        y = np.array([[0.6], [0.8]])
        data = DataMatrix(np.hstack([y, y]))
        spec = ProblemSpec(variant=Variant.EXACT, affine=True, normalize_columns=False)
        res = solve(data, spec, FAST)
        C = res.coefficients.values
        assert C[0, 1] == pytest.approx(1.0, abs=1e-4)
        assert C[1, 0] == pytest.approx(1.0, abs=1e-4)

    def test_independent_subspaces_are_subspace_sparse(self):
        data, arr = independent_instance(d=3, n_points_per=8, seed=4)
        res = solve(data, EXACT, FAST)
        C = np.abs(res.coefficients.values)
        for i in range(data.n_points):
            total = C[:, i].sum()
            cross = C[arr.labels != arr.labels[i], i].sum()
            assert cross < 1e-5 * total

    def test_degenerate_scale_raises(self):
        with pytest.raises(DegenerateScaleError):
            solve(DataMatrix(np.eye(3)), ProblemSpec(variant=Variant.NOISE))

    def test_diag_exactly_zero(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=5)
        res = solve(data, EXACT, FAST)
        assert np.all(np.diagonal(res.coefficients.values) == 0.0)

    def test_not_converged_reported_not_raised(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=5)
        res = solve(data, EXACT, AdmmConfig(rho=50.0, max_iter=3))
        assert res.diagnostics.converged is False
        assert res.diagnostics.iterations == 3

    def test_deterministic(self):
        data, _ = chain_instance(45, 8, d=2, D=12, seed=9)
        a = solve(data, EXACT, FAST)
        b = solve(data, EXACT, FAST)
        np.testing.assert_array_equal(a.coefficients.values, b.coefficients.values)
        assert a.diagnostics.iterations == b.diagnostics.iterations


class TestSolveContracts:
    def test_oracle_equivalence_small_instances(self):
        rng = np.random.default_rng(100)
        for _ in range(5):
            D = int(rng.integers(4, 11))
            N = int(rng.integers(D + 2, 31))
            Y = rng.standard_normal((D, N))
            Y /= np.linalg.norm(Y, axis=0)
            res = solve(DataMatrix(Y), EXACT, TIGHT)
            ours = np.abs(res.coefficients.values).sum(axis=0)
            oracle = exact_column_objectives(Y)
            np.testing.assert_allclose(ours, oracle, rtol=1e-3)

    def test_noise_collapse_threshold(self):
        data, _ = chain_instance(60, 16, seed=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            below = ProblemSpec(variant=Variant.NOISE, alpha_z=0.99, normalize_columns=False)
        res = solve(data, below, AdmmConfig(rho=20.0))
        col_l1 = np.abs(res.coefficients.values).sum(axis=0)
        assert np.any(col_l1 == 0.0)

    def test_outlier_collapse_threshold(self):
        data, _ = chain_instance(60, 32, seed=2, antipodal=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            below = ProblemSpec(variant=Variant.OUTLIER, alpha_e=0.99, normalize_columns=False)
        res = solve(data, below, AdmmConfig(rho=20.0))
        C, E = res.coefficients.values, res.outliers
        col_l1 = np.abs(C).sum(axis=0)
        collapsed = [
            i
            for i in np.flatnonzero(col_l1 <= 1e-4)
            if np.abs(E[:, i] - data.values[:, i]).max() <= 1e-4
        ]
        assert len(collapsed) >= 1

    def test_outlier_matches_lp_column(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=6)
        spec = ProblemSpec(variant=Variant.OUTLIER, alpha_e=5.0, normalize_columns=False)
        res = solve(data, spec, AdmmConfig(rho=20.0, epsilon=1e-6, max_iter=60000))
        lam_e = 5.0 / mu_e(data)
        C, E = res.coefficients.values, res.outliers
        for i in (0, 7, 20):
            c_lp, e_lp = outlier_column_solution(data.values, i, lam_e)
            ours = np.abs(C[:, i]).sum() + lam_e * np.abs(E[:, i]).sum()
            lp = np.abs(c_lp).sum() + lam_e * np.abs(e_lp).sum()
            assert ours == pytest.approx(lp, rel=1e-3, abs=1e-6)

    def test_equality_residual_small_for_outlier(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=6)
        spec = ProblemSpec(variant=Variant.OUTLIER, normalize_columns=False)
        res = solve(data, spec, AdmmConfig(rho=20.0))
        assert res.diagnostics.primal_residual_equality <= 1e-4

    def test_combined_variant_finds_planted_corruptions(self):
        rng = np.random.default_rng(33)
        data, _ = chain_instance(60, 12, d=2, D=20, seed=33)
        values = data.values + 0.005 * rng.standard_normal(data.values.shape)
        planted = set()
        for i in range(0, values.shape[1], 4):
            row = int(rng.integers(values.shape[0]))
            values[row, i] += rng.choice([-1.0, 1.0]) * 2.0
            planted.add((row, i))
        spec = ProblemSpec(
            variant=Variant.NOISE_AND_OUTLIER, alpha_z=800.0, alpha_e=20.0,
            normalize_columns=False,
        )
        res = solve(DataMatrix(values), spec, AdmmConfig(rho=20.0))
        assert res.diagnostics.converged
        E = np.abs(res.outliers)
        top = {
            tuple(idx)
            for idx in np.argwhere(E >= np.partition(E.ravel(), -len(planted))[-len(planted)])
        }
        assert len(planted & top) >= len(planted) // 2

    def test_affine_feasibility(self):
        # N = 9 points: the affine residual (<= eps on the consensus
        # iterate) plus nine per-entry consensus gaps stays within 10 eps.
        data, _ = chain_instance(50, 3, d=2, D=10, seed=3)
        spec = ProblemSpec(variant=Variant.NOISE, affine=True, normalize_columns=False)
        cfg = AdmmConfig(rho=800.0, epsilon=1e-6, max_iter=200000)
        res = solve(data, spec, cfg)
        assert res.diagnostics.converged
        sums = res.coefficients.values.sum(axis=0)
        assert np.abs(sums - 1.0).max() <= 10 * cfg.epsilon

    def test_residuals_self_consistent(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=8)
        res = solve(data, EXACT, FAST)
        recomputed = np.abs(res.consensus - res.coefficients.values).max()
        assert recomputed == pytest.approx(
            res.diagnostics.primal_residual_consensus, abs=1e-15
        )
        assert res.diagnostics.primal_residual_consensus <= FAST.epsilon

    def test_objective_and_residual_reported(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=8)
        res = solve(data, EXACT, TIGHT)
        C = res.coefficients.values
        assert res.diagnostics.objective == pytest.approx(np.abs(C).sum(), rel=1e-12)
        feas = np.linalg.norm(data.values - data.values @ C)
        assert res.diagnostics.residual_fro == pytest.approx(feas, rel=1e-12)
        assert feas < 1e-4  # near-feasibility of the equality-style variant

    def test_normalize_columns_flag(self):
        rng = np.random.default_rng(14)
        Y = rng.standard_normal((6, 10)) * rng.uniform(0.5, 5.0, size=10)
        res = solve(DataMatrix(Y), ProblemSpec(variant=Variant.EXACT), FAST)
        resn = solve(
            DataMatrix(Y / np.linalg.norm(Y, axis=0)),
            ProblemSpec(variant=Variant.EXACT, normalize_columns=False),
            FAST,
        )
        np.testing.assert_allclose(
            res.coefficients.values, resn.coefficients.values, atol=1e-12
        )


class TestRowRegularizer:
    def test_row_term_concentrates_rows(self):
        data, _ = chain_instance(60, 10, d=2, D=10, seed=21)
        plain = solve(data, EXACT, FAST)
        spec_r = ProblemSpec(variant=Variant.EXACT, lambda_r=5.0, normalize_columns=False)
        reg = solve(
            DataMatrix(data.values), spec_r, AdmmConfig(rho=50.0, max_iter=40000)
        )

        def nonzero_rows(C):
            return int(np.sum(np.abs(C).sum(axis=1) > 1e-6))

        assert nonzero_rows(reg.coefficients.values) <= nonzero_rows(
            plain.coefficients.values
        )
        assert row_sparsity_norm(reg.coefficients.values) <= row_sparsity_norm(
            plain.coefficients.values
        ) + 1e-6

    def test_row_term_objective_includes_regularizer(self):
        data, _ = chain_instance(60, 8, d=2, D=10, seed=22)
        spec_r = ProblemSpec(variant=Variant.EXACT, lambda_r=1.0, normalize_columns=False)
        res = solve(data, spec_r, AdmmConfig(rho=50.0, max_iter=40000))
        C = res.coefficients.values
        expected = np.abs(C).sum() + row_sparsity_norm(C)
        assert res.diagnostics.objective == pytest.approx(expected, rel=1e-3)


class TestSolveL1Dictionary:
    def test_matches_lp(self, rng):
        B = rng.standard_normal((6, 12))
        B /= np.linalg.norm(B, axis=0)
        x = B @ rng.standard_normal(12)
        x /= np.linalg.norm(x)
        a = solve_l1_dictionary(B, x, AdmmConfig(rho=50.0, epsilon=1e-6, max_iter=100000))
        assert np.abs(a).sum() == pytest.approx(min_l1_objective(B, x), rel=1e-3)
        assert np.linalg.norm(x - B @ a) < 1e-4

    def test_zero_target(self):
        B = np.eye(3)
        np.testing.assert_array_equal(solve_l1_dictionary(B, np.zeros(3)), np.zeros(3))
