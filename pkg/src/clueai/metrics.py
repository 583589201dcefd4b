"""Confusion-matrix based evaluation: per-class and support-weighted P/R/F1."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    """Counts[i, j] = episodes of true class i predicted as class j."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if not (0 <= t < num_classes and 0 <= p < num_classes):
            raise InputError(f"label out of range: true={t} pred={p}")
        cm[t, p] += 1
    return cm


def normalize_confusion(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized matrix plus a flag vector marking zero-support rows
    (those rows are left all-zero)."""
    support = cm.sum(axis=1)
    zero = support == 0
    norm = np.zeros(cm.shape, dtype=np.float64)
    nz = ~zero
    norm[nz] = cm[nz] / support[nz, None]
    return norm, zero


@dataclass
class MetricsReport:
    confusion: np.ndarray                 # raw counts
    normalized: np.ndarray                # rows sum to 1 (or all-zero, flagged)
    zero_support: np.ndarray              # bool per class
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    undefined_precision: np.ndarray       # flag: TP+FP == 0
    undefined_recall: np.ndarray          # flag: TP+FN == 0
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    support: np.ndarray
    train_seconds: float = 0.0
    test_seconds: float = 0.0
    per_seed: dict = field(default_factory=dict)


def compute_metrics(y_true, y_pred, num_classes: int) -> MetricsReport:
    cm = confusion_matrix(y_true, y_pred, num_classes)
    norm, zero = normalize_confusion(cm)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    support = cm.sum(axis=1)

    undef_p = (tp + fp) == 0
    undef_r = (tp + fn) == 0
    precision = np.where(undef_p, 0.0, tp / np.maximum(tp + fp, 1))
    recall = np.where(undef_r, 0.0, tp / np.maximum(tp + fn, 1))
    both_zero = (precision + recall) == 0
    f1 = np.where(both_zero, 0.0,
                  2.0 * precision * recall / np.maximum(precision + recall, 1e-300))

    total = support.sum()

    def weighted(metric):
        return float(support @ metric / total) if total else 0.0

    return MetricsReport(
        confusion=cm, normalized=norm, zero_support=zero,
        precision=precision, recall=recall, f1=f1,
        undefined_precision=undef_p, undefined_recall=undef_r,
        weighted_precision=weighted(precision),
        weighted_recall=weighted(recall),
        weighted_f1=weighted(f1),
        accuracy=float(tp.sum() / total) if total else 0.0,
        support=support,
    )


def aggregate(values: list[float]) -> tuple[float, float]:
    """Mean and population standard deviation across seeds."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
