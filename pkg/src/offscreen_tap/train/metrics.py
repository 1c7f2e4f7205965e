"""
Metrics for offscreen-tap.

Weighted F1, normalized location error, r^2 and confusion matrices.
Confusion matrices are indexed [true class, predicted class].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from offscreen_tap.core.errors import InputError

MAX_LOCATION_MAE = math.sqrt(2.0)


def confusion_matrix(truth: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise InputError("truth and pred must have the same shape")
    if truth.size:
        lo, hi = min(truth.min(), pred.min()), max(truth.max(), pred.max())
        if lo < 0 or hi >= n_classes:
            raise InputError(f"class index out of range [0, {n_classes})")
    flat = np.bincount(truth * n_classes + pred, minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes)


def _check_confusion(confusion: np.ndarray) -> np.ndarray:
    c = np.asarray(confusion, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InputError(f"Confusion matrix must be square, got {c.shape}")
    if np.any(c < 0):
        raise InputError("Confusion counts must be >= 0")
    if c.sum() == 0:
        raise InputError("Confusion matrix is all zero")
    return c


def per_class_f1(confusion: np.ndarray) -> np.ndarray:
    """F1 = 2PR / (P + R) per class; 0 wherever P, R or their sum is undefined."""
    c = _check_confusion(confusion)
    tp = np.diag(c)
    predicted = c.sum(axis=0)
    support = c.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        return np.where(denom > 0, 2 * precision * recall / denom, 0.0)


def weighted_f1(confusion: np.ndarray) -> float:
    """Per-class F1 averaged with true-class support weights."""
    c = _check_confusion(confusion)
    support = c.sum(axis=1)
    return float((per_class_f1(c) * support).sum() / support.sum())


def accuracy(confusion: np.ndarray) -> float:
    c = _check_confusion(confusion)
    return float(np.trace(c) / c.sum())


def normalized_confusion(confusion: np.ndarray) -> np.ndarray:
    """Rows scaled to sum to 1; rows without support stay zero."""
    c = np.asarray(confusion, dtype=np.float64)
    support = c.sum(axis=1, keepdims=True)
    return np.divide(c, support, out=np.zeros_like(c), where=support > 0)


def location_mae(
    truth: np.ndarray,
    pred: np.ndarray,
    w: float | np.ndarray = 1.0,
    h: float | np.ndarray = 1.0,
) -> float:
    """
    Mean of sqrt(((gx - tx) / w)^2 + ((gy - ty) / h)^2) over samples. With
    coordinates inside the screen the result lies in [0, sqrt(2)].
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    if truth.shape != pred.shape or truth.shape[-1] != 2:
        raise InputError(f"Expected matching [N, 2] coordinates, got {truth.shape}, {pred.shape}")
    w = np.asarray(w, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if np.any(w <= 0) or np.any(h <= 0):
        raise InputError("Screen width and height must be positive")
    if truth.shape[0] == 0:
        return math.nan
    dx = (truth[:, 0] - pred[:, 0]) / w
    dy = (truth[:, 1] - pred[:, 1]) / h
    return float(np.mean(np.sqrt(dx**2 + dy**2)))


def center_baseline_mae(truth_ratios: np.ndarray) -> float:
    """Error of always predicting the screen centre."""
    truth = np.atleast_2d(truth_ratios)
    return location_mae(truth, np.full_like(truth, 0.5, dtype=np.float64))


def r2(preds: np.ndarray, truths: np.ndarray) -> float:
    """
    1 - SS_res / SS_tot per coordinate, averaged over coordinates. A constant
    coordinate scores 1.0 when predicted exactly and 0.0 otherwise.
    """
    preds = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    truths = np.atleast_2d(np.asarray(truths, dtype=np.float64))
    if preds.shape != truths.shape:
        raise InputError(f"r2 shape mismatch: {preds.shape} vs {truths.shape}")
    if preds.shape[0] == 0:
        return math.nan
    scores = []
    for j in range(truths.shape[1]):
        ss_res = float(((truths[:, j] - preds[:, j]) ** 2).sum())
        ss_tot = float(((truths[:, j] - truths[:, j].mean()) ** 2).sum())
        if ss_tot == 0.0:
            scores.append(1.0 if ss_res == 0.0 else 0.0)
        else:
            scores.append(1.0 - ss_res / ss_tot)
    return float(np.mean(scores))


@dataclass
class MetricsReport:
    """Evaluation summary. ``f1`` and ``confusion`` are keyed by head name."""

    paradigm: str = "one_to_n"
    f1: dict[str, float] = field(default_factory=dict)
    accuracy: dict[str, float] = field(default_factory=dict)
    per_class_f1: dict[str, list[float]] = field(default_factory=dict)
    confusion: dict[str, list[list[int]]] = field(default_factory=dict)
    location_mae: float | None = None
    center_baseline_mae: float | None = None
    r2: float | None = None
    counts: dict[str, int] = field(default_factory=dict)
    folds: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for head, value in self.f1.items():
            if not 0.0 <= value <= 1.0:
                raise InputError(f"F1 for {head} out of range: {value}")
        if self.location_mae is not None and not math.isnan(self.location_mae):
            if not 0.0 <= self.location_mae <= MAX_LOCATION_MAE + 1e-9:
                raise InputError(f"location MAE out of range: {self.location_mae}")
        if self.r2 is not None and not math.isnan(self.r2) and self.r2 > 1.0 + 1e-12:
            raise InputError(f"r2 above 1: {self.r2}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)
