"""Error and agreement metrics reported in the selection and test tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def _pair(y_true, y_pred):
    a = np.asarray(y_true, dtype=float).ravel()
    b = np.asarray(y_pred, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("metrics need at least one value")
    return a, b


def rmse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.mean(np.abs(a - b)))


def pearson(x, y) -> Optional[float]:
    """Sample Pearson correlation, or None when either input has zero variance."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("pearson needs at least 2 values")
    da = a - a.mean()
    db = b - b.mean()
    ss_a = float(np.dot(da, da))
    ss_b = float(np.dot(db, db))
    if ss_a == 0.0 or ss_b == 0.0:
        return None
    r = float(np.dot(da, db)) / np.sqrt(ss_a * ss_b)
    return float(min(1.0, max(-1.0, r)))


@dataclass(frozen=True)
class MetricsRow:
    rmse: float
    mae: float
    corr: Optional[float]
    n: int

    def formatted(self, digits: int = 5) -> dict:
        return {
            "rmse": f"{self.rmse:.{digits}f}",
            "mae": f"{self.mae:.{digits}f}",
            "corr": "n/a" if self.corr is None else f"{self.corr:.{digits}f}",
        }


def score(y_true, y_pred) -> MetricsRow:
    a, b = _pair(y_true, y_pred)
    corr = pearson(a, b) if a.size >= 2 else None
    return MetricsRow(rmse(a, b), mae(a, b), corr, int(a.size))
