"""
Tests for F1, multi-class F1 averaging, MSE and error variance.
"""

import numpy as np
import pytest

from offloading.metrics import (
    Averaging,
    ConfusionCounts,
    error_variance,
    f1_score,
    mse,
    multiclass_f1,
    per_class_counts,
    per_sample_squared_errors,
)


class TestF1Score:
    """F1 from confusion counts."""

    def test_perfect_classifier(self):
        assert f1_score(ConfusionCounts(tp=10)) == (1.0, False)

    def test_worked_example(self):
        assert f1_score(ConfusionCounts(tp=2, fp=1, fn=1)).value == pytest.approx(4 / 6)

    def test_nothing_positive_is_degenerate_zero(self):
        result = f1_score(ConfusionCounts())
        assert result.value == 0.0
        assert result.degenerate is True

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1)


class TestMulticlassF1:
    """Macro and micro averaging over one-vs-rest counts."""

    def test_identical_predictions_score_one(self):
        labels = [0, 1, 2, 2, 1]
        assert multiclass_f1(labels, labels, Averaging.MACRO) == 1.0
        assert multiclass_f1(labels, labels, Averaging.MICRO) == 1.0

    def test_single_class_predictions_on_balanced_set(self):
        """Classes score 2/3 and 0, so the macro mean is 1/3."""
        assert multiclass_f1([0, 0, 1, 1], [0, 0, 0, 0]) == pytest.approx(1 / 3)

    def test_binary_micro_matches_hand_computation(self):
        y_true = [1, 1, 1, 0, 0, 0]
        y_pred = [1, 1, 0, 0, 0, 1]
        counts = per_class_counts(y_true, y_pred)
        assert counts[1] == ConfusionCounts(tp=2, fp=1, fn=1, tn=2)
        assert counts[0] == ConfusionCounts(tp=2, fp=1, fn=1, tn=2)
        # micro pools both classes: 2TP=8, FP+FN=4
        assert multiclass_f1(y_true, y_pred, Averaging.MICRO) == pytest.approx(8 / 12)
        assert multiclass_f1(y_true, y_pred, Averaging.MICRO) == pytest.approx(f1_score(counts[1]).value)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            multiclass_f1([0, 1], [0])


class TestMse:
    """Mean of squared differences and the variance of per-row errors."""

    def test_zero_when_equal(self):
        assert mse([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0

    def test_unit_offset(self):
        assert mse([0.0, 0.0], [1.0, 1.0]) == 1.0

    def test_matches_naive_recomputation(self):
        rng = np.random.default_rng(5)
        y_true = rng.normal(size=(40, 3))
        y_pred = rng.normal(size=(40, 3))
        naive = sum((y_true[i, j] - y_pred[i, j]) ** 2 for i in range(40) for j in range(3)) / 120
        assert mse(y_true, y_pred) == pytest.approx(naive, abs=1e-12)

        rows = [sum((y_true[i, j] - y_pred[i, j]) ** 2 for j in range(3)) / 3 for i in range(40)]
        mean = sum(rows) / 40
        assert error_variance(y_true, y_pred) == pytest.approx(sum((r - mean) ** 2 for r in rows) / 40, abs=1e-12)
        assert per_sample_squared_errors(y_true, y_pred) == pytest.approx(rows, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match='shape mismatch'):
            mse([[1.0, 2.0]], [[1.0]])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mse([], [])
