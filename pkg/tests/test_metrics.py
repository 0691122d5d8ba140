import numpy as np
import pytest

from irtfill.errors import (
    CategoryRangeError,
    DegenerateTestError,
    ShapeError,
    UndefinedCorrelationError,
)
from irtfill.metrics import paired_t_test, pearson, qwk, rmse


class TestRmse:
    def test_identical_is_zero(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_unit_shift(self):
        assert rmse([0.0, 0.0], [1.0, 1.0]) == pytest.approx(1.0)

    def test_hand_computed(self):
        assert rmse([0.0, 0.0, 0.0], [1.0, 2.0, 2.0]) == pytest.approx(np.sqrt(3.0))

    def test_zero_iff_equal(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=10)
        assert rmse(a, a) == 0.0
        b = a.copy()
        b[3] += 1e-9
        assert rmse(a, b) > 0.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            rmse([1.0], [1.0, 2.0])


class TestPearson:
    def test_affine_is_one(self):
        a = np.array([1.0, 2.0, 5.0, 3.0])
        assert pearson(a, 2 * a + 3) == pytest.approx(1.0)

    def test_negation_is_minus_one(self):
        a = np.array([1.0, 2.0, 5.0])
        assert pearson(a, -a) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert pearson([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5)

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=20)
        b = rng.normal(size=20)
        assert pearson(0.3 * a + 7, b) == pytest.approx(pearson(a, b), abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0], [1.0, 2.0])


class TestQwk:
    def test_perfect_agreement(self):
        assert qwk([1, 2, 3, 4, 5], [1, 2, 3, 4, 5], 5) == pytest.approx(1.0)

    def test_pinned_hand_value(self):
        # K=5: one off-by-one disagreement out of five; hand evaluation
        # of the weighted contingency formula gives 1 - (1/16)/(17/16),
        # cross-checked against sklearn's quadratic cohen_kappa_score.
        assert qwk([1, 2, 3, 4, 5], [1, 2, 3, 4, 4], 5) == pytest.approx(
            16.0 / 17.0, abs=1e-9
        )

    def test_random_permutation_near_zero(self):
        rng = np.random.default_rng(2)
        truth = rng.integers(1, 6, 20000)
        pred = rng.permutation(truth)
        assert abs(qwk(truth, pred, 5)) < 0.05

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = rng.integers(1, 5, 100)
        b = rng.integers(1, 5, 100)
        assert qwk(a, b, 4) == pytest.approx(qwk(b, a, 4), abs=1e-12)

    def test_constant_identical_raters(self):
        assert qwk([3, 3, 3], [3, 3, 3], 5) == 1.0

    def test_out_of_range(self):
        with pytest.raises(CategoryRangeError):
            qwk([0, 1], [1, 1], 5)


class TestPairedT:
    def test_constant_shift_degenerate(self):
        with pytest.raises(DegenerateTestError):
            paired_t_test([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])

    def test_zero_mean_difference(self):
        t, p, df = paired_t_test([1.0, -1.0], [0.0, 0.0])
        assert t == pytest.approx(0.0)
        assert p == pytest.approx(1.0)
        assert df == 1

    def test_hand_computed(self):
        # differences (1, 2, 3): mean 2, sd 1 -> t = 2 * sqrt(3)
        t, p, df = paired_t_test([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        assert t == pytest.approx(2 * np.sqrt(3), abs=1e-9)
        assert df == 2
        assert 0 < p < 1

    def test_sign_and_p_range(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a = rng.normal(size=10)
            b = rng.normal(size=10)
            t, p, df = paired_t_test(a, b)
            assert 0 < p <= 1
            assert np.sign(t) == np.sign((a - b).mean())
            assert df == 9

    def test_p_value_matches_reference_dist(self):
        from scipy import stats

        rng = np.random.default_rng(5)
        a = rng.normal(size=12)
        b = rng.normal(size=12)
        t, p, df = paired_t_test(a, b)
        ref = stats.ttest_rel(a, b)
        assert t == pytest.approx(ref.statistic, abs=1e-10)
        assert p == pytest.approx(ref.pvalue, abs=1e-10)
