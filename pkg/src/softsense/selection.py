"""Forward selection over an importance ranking, held-out evaluation, and
routing to a reduced model when sensors drop out."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .cart import GrowParams, grow_tree, prune_tree
from .dataio import Dataset, SplitIndices, canonical
from .errors import MissingFeatureError, NoModelError
from .forest import ForestParams, fit_forest
from .importance import FeatureRanking
from .linreg import fit_ols
from .metrics import MetricsRow, score

log = logging.getLogger(__name__)

FAMILIES = ("linear", "tree", "forest")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["family"], dict(d.get("params", {})), int(d.get("seed", 0)))


def fit_model(spec: ModelSpec, X, y, features: Sequence[str], n_jobs: Optional[int] = None):
    """Fit one model of ``spec.family`` on the named columns of ``X``."""
    columns = X.columns if isinstance(X, Dataset) else X
    for f in features:
        if f not in columns:
            raise MissingFeatureError(f)
    cols = {f: columns[f] for f in canonical(features)}
    y = np.asarray(y, dtype=float)
    if spec.family == "linear":
        return fit_ols(cols, y)
    if spec.family == "tree":
        params = GrowParams(**spec.params)
        tree = grow_tree(np.arange(y.size), cols, y, params)
        return prune_tree(tree, params.cp)
    params = ForestParams(seed=spec.seed, **spec.params)
    return fit_forest(cols, y, params, n_jobs=n_jobs)


@dataclass
class SelectionRow:
    subset: tuple[str, ...]
    metrics: Optional[MetricsRow] = None
    error: Optional[str] = None
    model: Any = field(default=None, repr=False)


@dataclass
class SelectionReport:
    rows: list[SelectionRow]
    ranking_used: FeatureRanking
    model: ModelSpec
    split_seed: int

    def to_csv(self) -> str:
        lines = ["rank,rmse,mae,corr,features"]
        for i, row in enumerate(self.rows, start=1):
            feats = '"' + ",".join(row.subset) + '"'
            if row.metrics is None:
                lines.append(f"{i},n/a,n/a,n/a,{feats}")
                continue
            m = row.metrics.formatted()
            lines.append(f"{i},{m['rmse']},{m['mae']},{m['corr']},{feats}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "split_seed": self.split_seed,
            "ranking_used": self.ranking_used.to_dict(),
            "rows": [
                {
                    "subset": list(r.subset),
                    "rmse": None if r.metrics is None else r.metrics.rmse,
                    "mae": None if r.metrics is None else r.metrics.mae,
                    "corr": None if r.metrics is None else r.metrics.corr,
                    "n": None if r.metrics is None else r.metrics.n,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def models(self) -> dict[tuple[str, ...], Any]:
        return {r.subset: r.model for r in self.rows if r.model is not None}


def forward_selection(data: Dataset, split: SplitIndices, ranking: FeatureRanking, spec: ModelSpec,
                      n_jobs: Optional[int] = None, keep_models: bool = False) -> SelectionReport:
    """Fit ``spec`` on the training rows using the first 1, 2, ... ranked
    features and score each fit on the validation rows.

    A subset whose fit fails is recorded with its error and the sweep continues.
    """
    features = ranking.features
    if not features:
        raise ValueError("ranking is empty")
    train = data.take(split.train)
    val = data.take(split.validation)
    rows = []
    for i in range(1, len(features) + 1):
        subset = tuple(features[:i])
        try:
            model = fit_model(spec, train, train.target, subset, n_jobs=n_jobs)
            metrics = score(val.target, model.predict(val))
        except Exception as exc:  # noqa: BLE001 - a failed subset is reported, not fatal
            log.warning("subset %s failed: %s", ",".join(subset), exc)
            rows.append(SelectionRow(subset, error=f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(SelectionRow(subset, metrics, model=model if keep_models else None))
    return SelectionReport(rows, ranking, spec, split.seed)


def evaluate_on_test(data: Dataset, split: SplitIndices, features: Sequence[str], spec: ModelSpec,
                     n_jobs: Optional[int] = None) -> MetricsRow:
    """Fit on the training rows with ``features``; score on the untouched test rows."""
    if not features:
        raise ValueError("need at least one feature")
    for f in features:
        if f not in data.columns:
            raise MissingFeatureError(f)
    train = data.take(split.train)
    test = data.take(split.test)
    model = fit_model(spec, train, train.target, features, n_jobs=n_jobs)
    return score(test.target, model.predict(test))


def _check_nested(keys: Sequence[tuple[str, ...]]) -> list[tuple[str, ...]]:
    ordered = sorted(keys, key=len)
    for short, long in zip(ordered, ordered[1:]):
        if long[: len(short)] != short:
            raise ValueError("model subsets must be nested prefixes of one ranking")
    return ordered


def choose_subset(subsets: Iterable[Sequence[str]], available: Iterable[str]) -> tuple[str, ...]:
    """Largest prefix whose features are all available."""
    available = set(available)
    ordered = _check_nested([tuple(s) for s in subsets])
    usable = [s for s in ordered if set(s) <= available]
    if not usable:
        raise NoModelError(
            "no model can serve the available features "
            f"({', '.join(canonical(available)) or 'none'}); "
            f"the smallest model needs {', '.join(ordered[0]) if ordered else 'a model'}"
        )
    return usable[-1]


def fallback_predict(models: Mapping[tuple[str, ...], Any], available: Iterable[str],
                     x: Mapping[str, float]) -> tuple[float, list[str]]:
    subset = choose_subset(models.keys(), available)
    row = {f: np.array([float(x[f])]) for f in subset}
    return float(models[subset].predict(row)[0]), list(subset)
