"""
Tests for weighted F1, location error and r^2.
"""

import math

import numpy as np
import pytest

from offscreen_tap.core.errors import InputError
from offscreen_tap.train.metrics import (
    MetricsReport,
    accuracy,
    center_baseline_mae,
    confusion_matrix,
    location_mae,
    normalized_confusion,
    per_class_f1,
    r2,
    weighted_f1,
)

sklearn_metrics = pytest.importorskip("sklearn.metrics")


class TestWeightedF1:
    """Support-weighted F1"""

    def test_hand_case(self):
        assert weighted_f1(np.array([[5, 5], [0, 10]])) == pytest.approx(0.7333, abs=1e-4)

    def test_diagonal_is_perfect(self):
        assert weighted_f1(np.diag([3, 7, 1])) == 1.0

    def test_unpredicted_class_scores_zero(self):
        np.testing.assert_allclose(per_class_f1(np.array([[0, 4], [0, 6]]))[0], 0.0)

    def test_permutation_invariant(self, rng):
        c = rng.integers(0, 20, (5, 5))
        perm = rng.permutation(5)
        assert weighted_f1(c[np.ix_(perm, perm)]) == pytest.approx(weighted_f1(c))

    def test_all_zero_rejected(self):
        with pytest.raises(InputError):
            weighted_f1(np.zeros((3, 3)))

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            weighted_f1(np.ones((2, 3)))

    @pytest.mark.parametrize("case", range(20))
    def test_matches_sklearn(self, case):
        rng = np.random.default_rng(case)
        k = int(rng.integers(2, 8))
        truth = rng.integers(0, k, 200)
        pred = np.where(rng.uniform(size=200) < 0.6, truth, rng.integers(0, k, 200))
        labels = list(range(k))
        ours = confusion_matrix(truth, pred, k)
        np.testing.assert_array_equal(
            ours, sklearn_metrics.confusion_matrix(truth, pred, labels=labels)
        )
        expected = sklearn_metrics.f1_score(
            truth, pred, labels=labels, average="weighted", zero_division=0
        )
        assert weighted_f1(ours) == pytest.approx(expected, abs=1e-12)


class TestConfusion:
    """Confusion matrices"""

    def test_indexing(self):
        c = confusion_matrix(np.array([0, 0, 1]), np.array([1, 0, 1]), 2)
        assert c.tolist() == [[1, 1], [0, 1]]
        assert accuracy(c) == pytest.approx(2 / 3)

    def test_out_of_range(self):
        with pytest.raises(InputError):
            confusion_matrix(np.array([0, 3]), np.array([0, 1]), 3)

    def test_normalized_rows(self):
        n = normalized_confusion(np.array([[2, 2], [0, 0]]))
        assert n.tolist() == [[0.5, 0.5], [0.0, 0.0]]


class TestLocationError:
    """Normalized Euclidean location error"""

    def test_opposite_corners(self):
        assert location_mae([[0, 0]], [[1, 1]]) == pytest.approx(math.sqrt(2))

    def test_corner_vs_centre(self):
        assert location_mae([[0, 0]], [[0.5, 0.5]]) == pytest.approx(0.7071, abs=1e-4)
        assert center_baseline_mae(np.array([[1.0, 1.0]])) == pytest.approx(0.7071, abs=1e-4)

    def test_symmetric(self, rng):
        a, b = rng.uniform(size=(10, 2)), rng.uniform(size=(10, 2))
        assert location_mae(a, b) == pytest.approx(location_mae(b, a))

    def test_scale_invariant(self, rng):
        a, b = rng.uniform(size=(10, 2)), rng.uniform(size=(10, 2))
        mm = np.array([70.0, 140.0])
        assert location_mae(a * mm, b * mm, 70.0, 140.0) == pytest.approx(location_mae(a, b))

    def test_bounded(self, rng):
        a, b = rng.uniform(size=(50, 2)), rng.uniform(size=(50, 2))
        assert 0.0 <= location_mae(a, b) <= math.sqrt(2)

    def test_empty_is_nan(self):
        assert math.isnan(location_mae(np.zeros((0, 2)), np.zeros((0, 2))))

    def test_bad_screen(self):
        with pytest.raises(InputError):
            location_mae([[0, 0]], [[1, 1]], w=0.0)


class TestR2:
    """Coefficient of determination"""

    def test_matches_sklearn(self, rng):
        truth = rng.uniform(size=(40, 2))
        pred = truth + 0.1 * rng.standard_normal((40, 2))
        assert r2(pred, truth) == pytest.approx(sklearn_metrics.r2_score(truth, pred))

    def test_perfect(self, rng):
        truth = rng.uniform(size=(10, 2))
        assert r2(truth, truth) == 1.0

    def test_constant_truth(self):
        truth = np.full((4, 2), 0.5)
        assert r2(truth, truth) == 1.0
        assert r2(truth + 0.1, truth) == 0.0


class TestMetricsReport:
    """Report range checks"""

    def test_f1_out_of_range(self):
        with pytest.raises(InputError):
            MetricsReport(f1={"event": 1.2})

    def test_location_out_of_range(self):
        with pytest.raises(InputError):
            MetricsReport(location_mae=2.0)

    def test_nan_location_allowed(self):
        assert math.isnan(MetricsReport(location_mae=math.nan).location_mae)

    def test_to_dict(self):
        report = MetricsReport(f1={"event": 0.5}, counts={"test": 10})
        assert report.to_dict()["f1"] == {"event": 0.5}
