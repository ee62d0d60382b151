import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssc.core import (
    ClusteringResult,
    CoefficientMatrix,
    DataMatrix,
    EmptyMaskError,
    NonFiniteError,
    NotOrthonormalError,
    ProblemSpec,
    SubspaceArrangement,
    TooFewPointsError,
    Variant,
    ZeroColumnError,
    normalize_unit_columns,
    validate,
)


class TestValidate:
    def test_accepts_finite_matrix(self):
        data = DataMatrix(np.arange(12.0).reshape(3, 4))
        assert validate(data) is data

    def test_rejects_nan(self):
        values = np.ones((3, 4))
        values[1, 2] = np.nan
        with pytest.raises(NonFiniteError):
            validate(DataMatrix(values))

    def test_rejects_inf(self):
        values = np.ones((3, 4))
        values[0, 0] = np.inf
        with pytest.raises(NonFiniteError):
            validate(DataMatrix(values))

    def test_rejects_single_point(self):
        with pytest.raises(TooFewPointsError):
            validate(DataMatrix(np.ones((3, 1))))

    def test_rejects_empty_mask(self):
        data = DataMatrix(np.ones((3, 2)), masks=[np.array([0, 1]), np.array([], dtype=int)])
        with pytest.raises(EmptyMaskError):
            validate(data)

    def test_never_mutates(self):
        values = np.arange(6.0).reshape(2, 3)
        data = DataMatrix(values)
        before = data.values.copy()
        validate(data)
        np.testing.assert_array_equal(data.values, before)

    def test_values_are_readonly(self):
        data = DataMatrix(np.ones((2, 2)))
        with pytest.raises(ValueError):
            data.values[0, 0] = 5.0


class TestNormalizeUnitColumns:
    def test_three_four_column(self):
        out = normalize_unit_columns(DataMatrix(np.array([[3.0], [4.0]])))
        np.testing.assert_allclose(out.values[:, 0], [0.6, 0.8])

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        data = DataMatrix(rng.standard_normal((5, 7)))
        once = normalize_unit_columns(data)
        twice = normalize_unit_columns(once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)

    def test_zero_column_rejected(self):
        with pytest.raises(ZeroColumnError):
            normalize_unit_columns(DataMatrix(np.array([[0.0, 1.0], [0.0, 1.0]])))

    def test_direction_preserved(self, rng):
        values = rng.standard_normal((4, 6))
        out = normalize_unit_columns(DataMatrix(values)).values
        cos = np.sum(out * values, axis=0) / np.linalg.norm(values, axis=0)
        np.testing.assert_allclose(cos, 1.0, atol=1e-12)

    @given(
        arrays(
            np.float64,
            (3, 4),
            elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        ).filter(lambda a: np.linalg.norm(a, axis=0).min() > 1e-6)
    )
    @settings(max_examples=50, deadline=None)
    def test_unit_norms_property(self, values):
        out = normalize_unit_columns(DataMatrix(values))
        np.testing.assert_allclose(np.linalg.norm(out.values, axis=0), 1.0, atol=1e-12)


class TestProblemSpec:
    def test_defaults(self):
        spec = ProblemSpec()
        assert spec.variant is Variant.NOISE
        assert spec.alpha_z == 800.0 and spec.alpha_e == 20.0
        assert spec.lambda_r == 0.0 and not spec.affine

    def test_accepts_string_variant(self):
        assert ProblemSpec(variant="both").variant is Variant.NOISE_AND_OUTLIER

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            ProblemSpec(alpha_z=0.0)

    def test_warns_below_collapse_threshold(self):
        with pytest.warns(UserWarning):
            ProblemSpec(variant=Variant.NOISE, alpha_z=0.5)
        with pytest.warns(UserWarning):
            ProblemSpec(variant=Variant.OUTLIER, alpha_e=0.9)

    def test_rejects_negative_lambda_r(self):
        with pytest.raises(ValueError):
            ProblemSpec(lambda_r=-0.1)


class TestCoefficientMatrix:
    def test_zero_diagonal_enforced(self):
        with pytest.raises(ValueError):
            CoefficientMatrix(np.eye(3))

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            CoefficientMatrix(np.zeros((2, 3)))

    def test_rejects_nonfinite(self):
        values = np.zeros((2, 2))
        values[0, 1] = np.nan
        with pytest.raises(NonFiniteError):
            CoefficientMatrix(values)


class TestSubspaceArrangement:
    def test_orthonormality_enforced(self):
        with pytest.raises(NotOrthonormalError):
            SubspaceArrangement((np.array([[1.0], [1.0]]),))

    def test_labels_range_checked(self):
        basis = np.array([[1.0], [0.0]])
        with pytest.raises(ValueError):
            SubspaceArrangement((basis,), labels=np.array([0, 1]))

    def test_every_subspace_needs_a_point(self):
        e1 = np.array([[1.0], [0.0]])
        e2 = np.array([[0.0], [1.0]])
        with pytest.raises(ValueError):
            SubspaceArrangement((e1, e2), labels=np.array([0, 0]))

    def test_dims(self):
        frame = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 5)))[0]
        arr = SubspaceArrangement((frame[:, :2], frame[:, 2:5]))
        assert arr.dims == (2, 3)
        assert arr.ambient_dim == 6


class TestClusteringResult:
    def test_distinct_label_count_enforced(self):
        with pytest.raises(ValueError):
            ClusteringResult(np.array([0, 0, 0]), 2, np.zeros(3), 0.0)

    def test_roundtrip(self):
        res = ClusteringResult(np.array([1, 0, 1]), 2, np.array([0.0, 0.1, 0.9]), 1.5)
        assert res.n_clusters == 2
        assert res.kmeans_inertia == 1.5
