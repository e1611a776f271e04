"""Confusion matrices and macro-averaged classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    support: int

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "support": self.support,
        }


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts with rows indexed by true label, columns by predicted label."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"label arrays must be 1-d and equal length: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("cannot build a confusion matrix from zero samples")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError(f"{name} labels outside [0, {num_classes})")
    flat = y_true.astype(np.int64) * num_classes + y_pred.astype(np.int64)
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def compute_metrics(confusion: np.ndarray) -> Metrics:
    """Accuracy plus macro one-vs-rest precision/recall and their F-score.

    A class never predicted contributes precision 0 rather than NaN; a class
    absent from the true labels likewise contributes recall 0. The F-score is
    the harmonic mean of the two macro averages, not a mean of per-class
    F-scores.
    """
    confusion = np.asarray(confusion)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {confusion.shape}")
    total = int(confusion.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    if (confusion < 0).any():
        raise ValueError("confusion matrix has negative counts")

    diag = np.diag(confusion).astype(np.float64)
    pred_totals = confusion.sum(axis=0).astype(np.float64)
    true_totals = confusion.sum(axis=1).astype(np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        per_class_p = np.where(pred_totals > 0, diag / pred_totals, 0.0)
        per_class_r = np.where(true_totals > 0, diag / true_totals, 0.0)

    precision = float(per_class_p.mean())
    recall = float(per_class_r.mean())
    f_score = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    accuracy = float(diag.sum() / total)
    return Metrics(accuracy, precision, recall, float(f_score), total)


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> Metrics:
    return compute_metrics(confusion_matrix(y_true, y_pred, num_classes))
