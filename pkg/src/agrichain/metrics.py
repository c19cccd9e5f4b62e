"""Detection-quality scores and the centralized per-window baseline."""

from __future__ import annotations

import csv
from typing import Iterable

import numpy as np

from .errors import ShapeMismatchError
from .field import FrequencyTable


def as_class_codes(labels) -> np.ndarray:
    """Validate a vector of class codes 1..5 (A..E)."""
    codes = np.asarray(labels)
    if codes.ndim != 1:
        raise ShapeMismatchError("class vectors are one-dimensional")
    if codes.size and (codes.min() < 1 or codes.max() > 5):
        raise ValueError("class codes must lie in 1..5")
    return codes.astype(np.int64)


def _pair(actual, predicted):
    a, p = as_class_codes(actual), as_class_codes(predicted)
    if a.shape != p.shape:
        raise ShapeMismatchError(f"length mismatch: {a.size} vs {p.size}")
    if a.size == 0:
        raise ValueError("empty class vectors")
    return a, p


def mse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean((a - p) ** 2))


def accuracy(actual, predicted) -> float:
    """Percentage of farms whose class was identified exactly."""
    a, p = _pair(actual, predicted)
    return 100.0 * float(np.mean(a == p))


def centralized_classify(table: FrequencyTable) -> np.ndarray:
    """Per-farm majority class of the window, as codes 1..5; ties go to the lower class."""
    return table.counts.argmax(axis=0) + 1


def write_scores_csv(path, rows: Iterable[tuple[int, str, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "method", "mse", "accuracy"])
        writer.writerows(rows)
