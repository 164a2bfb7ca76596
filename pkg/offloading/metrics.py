"""Evaluation metrics shared by the hybrid network and the baselines."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from django.db import models
from sklearn.metrics import mean_squared_error, multilabel_confusion_matrix


class Averaging(models.TextChoices):
    MACRO = 'Macro'
    MICRO = 'Micro'


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError('confusion counts must be non-negative')

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


class F1(NamedTuple):
    value: float
    degenerate: bool


def f1_score(counts: ConfusionCounts):
    """2TP / (2TP + FN + FP); 0 flagged degenerate when nothing is positive anywhere."""
    denominator = 2 * counts.tp + counts.fn + counts.fp
    if denominator == 0:
        return F1(0.0, True)
    return F1(2 * counts.tp / denominator, False)


def per_class_counts(y_true, y_pred):
    """One-vs-rest counts for every label seen in either sequence, in sorted label order."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f'label sequences differ in length: {len(y_true)} != {len(y_pred)}')
    labels = sorted(set(y_true) | set(y_pred))
    if not labels:
        return {}
    matrices = multilabel_confusion_matrix(y_true, y_pred, labels=labels)
    return {
        label: ConfusionCounts(tp=int(m[1, 1]), fp=int(m[0, 1]), fn=int(m[1, 0]), tn=int(m[0, 0]))
        for label, m in zip(labels, matrices)
    }


def multiclass_f1(y_true, y_pred, averaging=Averaging.MACRO):
    counts = per_class_counts(y_true, y_pred)
    if not counts:
        return 0.0
    if averaging == Averaging.MICRO:
        total = ConfusionCounts()
        for c in counts.values():
            total = total + c
        return f1_score(total).value
    return float(np.mean([f1_score(c).value for c in counts.values()]))


def _check_shapes(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError(f'shape mismatch: {y_true.shape} != {y_pred.shape}')
    return y_true, y_pred


def mse(y_true, y_pred):
    """Mean of squared differences over samples and dimensions."""
    y_true, y_pred = _check_shapes(y_true, y_pred)
    if y_true.size == 0:
        raise ValueError('empty arrays')
    return float(mean_squared_error(y_true, y_pred))


def per_sample_squared_errors(y_true, y_pred):
    y_true, y_pred = _check_shapes(y_true, y_pred)
    diff = (y_true - y_pred) ** 2
    return diff.reshape(len(diff), -1).mean(axis=1) if diff.ndim > 1 else diff


def error_variance(y_true, y_pred):
    """Population variance of the per-sample squared errors."""
    return float(np.var(per_sample_squared_errors(y_true, y_pred)))
