"""Model-free feature scoring and the pairwise correlation matrix."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .dataio import TARGET, Dataset, feature_key
from .errors import DegenerateWarning, InsufficientDataError
from .metrics import pearson

METHODS = ("chi_squared", "gain_ratio", "correlation", "rf_permutation")
FILTERS = ("chi_squared", "gain_ratio", "correlation")
DEFAULT_BINS = 5


@dataclass(frozen=True)
class FeatureRanking:
    method: str
    entries: tuple[tuple[str, float], ...]

    @property
    def features(self) -> list[str]:
        return [f for f, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.features[:k]

    def to_dict(self) -> dict:
        return {"method": self.method, "entries": [[f, s] for f, s in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureRanking":
        return cls(d["method"], tuple((f, float(s)) for f, s in d["entries"]))


def rank_features(scores: Mapping[str, float], method: str) -> FeatureRanking:
    """Sort descending by score; equal scores keep A..H order."""
    if not scores:
        raise ValueError("no scores to rank")
    if method not in METHODS:
        raise ValueError(f"unknown ranking method {method!r}")
    order = sorted(scores, key=lambda f: (-scores[f], feature_key(f)))
    return FeatureRanking(method, tuple((f, float(scores[f])) for f in order))


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    undefined: tuple[tuple[str, str], ...]

    def __getitem__(self, pair) -> float:
        a, b = pair
        return float(self.values[self.labels.index(a), self.labels.index(b)])

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.labels)]
        for i, a in enumerate(self.labels):
            lines.append(a + "," + ",".join(f"{v:.5f}" for v in self.values[i]))
        if self.undefined:
            lines.append("# undefined (zero variance, shown as 0): "
                         + " ".join(f"{a}/{b}" for a, b in self.undefined))
        return "\n".join(lines) + "\n"


def correlation_matrix(data: Dataset) -> CorrelationMatrix:
    if data.n_rows < 2:
        raise InsufficientDataError("correlation needs at least 2 rows")
    labels = (*data.columns, TARGET)
    cols = [*data.columns.values(), data.target]
    k = len(labels)
    values = np.eye(k)
    undefined = []
    for i in range(k):
        for j in range(i + 1, k):
            r = pearson(cols[i], cols[j])
            if r is None:
                undefined.append((labels[i], labels[j]))
                r = 0.0
            values[i, j] = values[j, i] = r
    return CorrelationMatrix(labels, values, tuple(undefined))


class Binned(NamedTuple):
    labels: np.ndarray
    degenerate: bool


def discretize_equal_frequency(values, k: int = DEFAULT_BINS) -> Binned:
    """Bin ``values`` at their (i/k)-quantiles; values on a boundary fall in the lower bin."""
    v = np.asarray(values, dtype=float).ravel()
    if k < 2:
        raise ValueError("need at least 2 bins")
    if v.size < k:
        raise InsufficientDataError(f"{v.size} values cannot fill {k} bins")
    cuts = np.quantile(v, np.arange(1, k) / k)
    labels = np.searchsorted(cuts, v, side="left")
    return Binned(labels, bool(np.unique(labels).size < 2))


def contingency(a: np.ndarray, b: np.ndarray, ka: int, kb: int) -> np.ndarray:
    table = np.zeros((ka, kb))
    np.add.at(table, (a, b), 1.0)
    return table


def _binned_pair(x, target, k):
    bx = discretize_equal_frequency(x, k)
    bt = discretize_equal_frequency(target, k)
    if bx.degenerate or bt.degenerate:
        warnings.warn("degenerate discretization; score set to 0", DegenerateWarning, stacklevel=3)
        return None
    return contingency(bx.labels, bt.labels, k, k)


def chi_squared_score(x, target, k: int = DEFAULT_BINS) -> float:
    """Pearson chi-squared statistic of the binned x vs binned target table."""
    table = _binned_pair(x, target, k)
    if table is None:
        return 0.0
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    mask = expected > 0
    return float(np.sum((table[mask] - expected[mask]) ** 2 / expected[mask]))


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def gain_ratio_score(x, target, k: int = DEFAULT_BINS) -> float:
    """Information gain about the binned target from binned x, divided by H(x)."""
    table = _binned_pair(x, target, k)
    if table is None:
        return 0.0
    h_x = _entropy_bits(table.sum(axis=1))
    if h_x == 0:
        return 0.0
    h_t = _entropy_bits(table.sum(axis=0))
    h_joint = _entropy_bits(table.ravel())
    return float((h_t + h_x - h_joint) / h_x)


def correlation_filter_score(x, target) -> float:
    r = pearson(x, target)
    if r is None:
        warnings.warn("zero-variance input; correlation score set to 0", DegenerateWarning, stacklevel=2)
        return 0.0
    return abs(r)


def filter_scores(data: Dataset, method: str, k: int = DEFAULT_BINS,
                  features: Sequence[str] | None = None) -> dict[str, float]:
    features = list(data.columns) if features is None else list(features)
    if method == "chi_squared":
        fn = lambda x: chi_squared_score(x, data.target, k)
    elif method == "gain_ratio":
        fn = lambda x: gain_ratio_score(x, data.target, k)
    elif method == "correlation":
        fn = lambda x: correlation_filter_score(x, data.target)
    else:
        raise ValueError(f"unknown filter method {method!r}")
    return {f: fn(data.columns[f]) for f in features}


def filter_rankings(data: Dataset, k: int = DEFAULT_BINS) -> dict[str, FeatureRanking]:
    return {m: rank_features(filter_scores(data, m, k), m) for m in FILTERS}


def rankings_csv(rankings: Sequence[FeatureRanking]) -> str:
    lines = ["method,importance"]
    for r in rankings:
        lines.append(f'{r.method},"{", ".join(r.features)}"')
    return "\n".join(lines) + "\n"
