"""Ordinary least squares with an intercept, solved through a QR factorization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .dataio import as_matrix
from .errors import InsufficientDataError, RankDeficientError

# A column is collinear when orthogonalization leaves less than this share of its norm.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: dict[str, float]
    features: tuple[str, ...]
    training_n: int

    family = "linear"

    def predict(self, X) -> np.ndarray:
        return predict_linear(self, X)

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefficients": [self.coefficients[f] for f in self.features],
            "features": list(self.features),
            "training_n": self.training_n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        feats = tuple(d["features"])
        return cls(float(d["intercept"]), dict(zip(feats, map(float, d["coefficients"]))),
                   feats, int(d["training_n"]))


def _collinear_set(R: np.ndarray, j: int, names: Sequence[str]) -> list[str]:
    if j == 0:
        return [names[0]]
    c = solve_triangular(R[:j, :j], R[:j, j])
    scale = np.max(np.abs(c)) if c.size else 0.0
    involved = [names[k] for k in range(j) if scale > 0 and abs(c[k]) > 1e-8 * scale]
    return involved + [names[j]]


def fit_ols(X: Mapping[str, np.ndarray], y, features: Sequence[str] | None = None) -> LinearModel:
    """Least-squares fit of ``y`` on the given feature columns plus an intercept.

    Raises RankDeficientError naming the collinear columns (``"(intercept)"``
    stands for the constant column) when the design is not full rank.
    """
    features = tuple(X) if features is None else tuple(features)
    y = np.asarray(y, dtype=float)
    Z = np.column_stack([np.ones(y.size), as_matrix(X, features)])
    n, k = Z.shape
    if n <= len(features):
        raise InsufficientDataError(f"{n} rows cannot determine {len(features)} coefficients plus an intercept")
    Q, R = np.linalg.qr(Z)
    names = ["(intercept)", *features]
    norms = np.linalg.norm(Z, axis=0)
    for j in range(k):
        if norms[j] == 0 or abs(R[j, j]) < RANK_RTOL * norms[j]:
            raise RankDeficientError(_collinear_set(R, j, names))
    beta = solve_triangular(R, Q.T @ y)
    return LinearModel(float(beta[0]), {f: float(b) for f, b in zip(features, beta[1:])}, features, n)


def predict_linear(model: LinearModel, X) -> np.ndarray:
    M = as_matrix(X, model.features)
    coef = np.array([model.coefficients[f] for f in model.features])
    return model.intercept + M @ coef
