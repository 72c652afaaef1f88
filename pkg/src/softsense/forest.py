"""Random forest regression with out-of-bag error and permutation importance."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .cart import FOREST_GROW, GrowParams, Tree, grow_matrix, sort_order
from .dataio import Dataset, as_matrix, canonical, feature_key

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    mtry: Optional[int] = None  # None -> max(1, p // 3)
    bootstrap: bool = True
    seed: int = 0
    grow: GrowParams = FOREST_GROW

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")

    def resolved_mtry(self, p: int) -> int:
        m = max(1, p // 3) if self.mtry is None else self.mtry
        if m > p:
            raise ValueError(f"mtry={m} exceeds the {p} available features")
        return m

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        d = dict(d)
        d["grow"] = GrowParams(**d["grow"])
        return cls(**d)


def tree_stream(seed: int, t: int) -> np.random.Generator:
    """Random stream owned by tree ``t``; independent of build order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, t])))


def draw_sample(seed: int, t: int, n: int, bootstrap: bool) -> tuple[np.ndarray, int]:
    """Per-tree row counts (bootstrap multiset) and node-sampling seed."""
    rng = tree_stream(seed, t)
    if bootstrap:
        counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)
    else:
        counts = np.ones(n, dtype=np.int64)
    return counts, int(rng.integers(0, 2**63))


@dataclass(frozen=True, eq=False)
class Forest:
    trees: list[Tree]
    params: ForestParams
    features: tuple[str, ...]
    n_train: int
    counts: list[np.ndarray] = field(repr=False)

    family = "forest"

    def oob_rows(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.counts[t] == 0)

    def bootstrap_rows(self, t: int) -> np.ndarray:
        return np.repeat(np.arange(self.n_train), self.counts[t])

    def predict(self, X) -> np.ndarray:
        return predict_forest(self, X)

    def to_dict(self) -> dict:
        # bootstrap multisets are regenerated from (seed, t, n_train) on load
        return {
            "params": self.params.to_dict(),
            "features": list(self.features),
            "n_train": self.n_train,
            "trees": [
                {"nodes": t.to_dict()["nodes"]} for t in self.trees
            ],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        params = ForestParams.from_dict(d["params"])
        features = tuple(d["features"])
        n = int(d["n_train"])
        p = len(features)
        grow = replace(params.grow, feature_subsample=params.resolved_mtry(p))
        trees = [
            Tree.from_dict({"features": features, "params": asdict(grow), "nodes": t["nodes"]})
            for t in d["trees"]
        ]
        counts = [draw_sample(params.seed, t, n, params.bootstrap)[0] for t in range(len(trees))]
        return cls(trees, params, features, n, counts)


def _workers(n_jobs: Optional[int]) -> int:
    if n_jobs is None:
        return os.cpu_count() or 1
    return max(1, n_jobs)


def fit_forest(X, y, params: ForestParams = ForestParams(), features: Sequence[str] | None = None,
               n_jobs: Optional[int] = None) -> Forest:
    """Fit ``params.n_trees`` unpruned trees on bootstrap resamples of the rows.

    Tree ``t`` draws its resample and node feature subsets from a stream seeded
    by ``(params.seed, t)``, so results do not depend on ``n_jobs``.
    """
    columns = X.columns if isinstance(X, Dataset) else X
    names = canonical(columns if features is None else features)
    M = as_matrix(X, names)
    y = np.asarray(y, dtype=float)
    n, p = M.shape
    if n == 0 or y.size != n:
        raise ValueError("forest needs a non-empty X with one target per row")
    grow = replace(params.grow, feature_subsample=params.resolved_mtry(p))
    order = sort_order(M)

    def build(t):
        counts, seed = draw_sample(params.seed, t, n, params.bootstrap)
        return grow_matrix(M, y, order, counts, grow, seed, names), counts

    workers = _workers(n_jobs)
    if workers == 1:
        built = [build(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(build, range(params.n_trees)))
    return Forest([b[0] for b in built], params, tuple(names), n, [b[1] for b in built])


def _tree_predict(tree: Tree, M: np.ndarray) -> np.ndarray:
    return _kernels.predict(tree.feature, tree.threshold, tree.left, tree.right, tree.value, M)


def predict_forest(forest: Forest, X) -> np.ndarray:
    """Unweighted mean of the member trees' predictions."""
    M = as_matrix(X, forest.features)
    total = np.zeros(M.shape[0])
    for tree in forest.trees:
        total += _tree_predict(tree, M)
    return total / len(forest.trees)


def oob_predictions(forest: Forest, X) -> tuple[np.ndarray, np.ndarray]:
    """Per-row mean over trees for which the row is out of bag, and the tree count.

    Rows that are in-bag for every tree get NaN and count 0.
    """
    if not forest.params.bootstrap:
        raise ValueError("forest was fit without bootstrap; there is no out-of-bag data")
    M = as_matrix(X, forest.features)
    if M.shape[0] != forest.n_train:
        raise ValueError(f"expected the {forest.n_train} training rows, got {M.shape[0]}")
    total = np.zeros(forest.n_train)
    hits = np.zeros(forest.n_train, dtype=np.int64)
    for t, tree in enumerate(forest.trees):
        rows = forest.oob_rows(t)
        if rows.size:
            total[rows] += _tree_predict(tree, M[rows])
            hits[rows] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        pred = np.where(hits > 0, total / np.maximum(hits, 1), np.nan)
    return pred, hits


def oob_error(forest: Forest, X, y) -> float:
    """Out-of-bag mean squared error over rows that are OOB for at least one tree."""
    pred, hits = oob_predictions(forest, X)
    y = np.asarray(y, dtype=float)
    covered = hits > 0
    if not covered.all():
        log.warning("%d rows are in-bag for every tree and were excluded from the OOB error",
                    int((~covered).sum()))
    if not covered.any():
        raise ValueError("no row is out of bag for any tree")
    return float(np.mean((y[covered] - pred[covered]) ** 2))


@dataclass(frozen=True)
class ImportanceReport:
    features: tuple[str, ...]
    raw_increase: dict[str, float]
    sd: dict[str, float]
    normalized: dict[str, float]
    percent_inc_mse: dict[str, float]
    oob_mse: float
    ranking: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "raw_increase": self.raw_increase,
            "sd": self.sd,
            "normalized": self.normalized,
            "percent_inc_mse": self.percent_inc_mse,
            "oob_mse": self.oob_mse,
            "ranking": list(self.ranking),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        lines = ["feature,normalized"]
        for f in self.ranking:
            lines.append(f"{f},{self.normalized[f]:.5f}")
        return "\n".join(lines) + "\n"


def perm_stream(perm_seed: int, t: int, j: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([perm_seed, t, j])))


def tree_permutation_diffs(forest: Forest, M: np.ndarray, y: np.ndarray, t: int, perm_seed: int) -> np.ndarray:
    """MSE increase on tree ``t``'s OOB rows after permuting each feature in turn."""
    tree = forest.trees[t]
    p = M.shape[1]
    diffs = np.zeros(p)
    rows = forest.oob_rows(t)
    if rows.size == 0:
        return diffs
    Mo = M[rows]
    yo = y[rows]
    base = np.mean((_tree_predict(tree, Mo) - yo) ** 2)
    used = set(np.unique(tree.feature[tree.feature >= 0]).tolist())
    for j in range(p):
        if j not in used:
            continue  # predictions cannot change
        perm = perm_stream(perm_seed, t, j).permutation(rows.size)
        Mp = Mo.copy()
        Mp[:, j] = Mo[perm, j]
        diffs[j] = np.mean((_tree_predict(tree, Mp) - yo) ** 2) - base
    return diffs


def permutation_importance(forest: Forest, X, y, perm_seed: int = 0,
                           n_jobs: Optional[int] = None) -> ImportanceReport:
    """Out-of-bag permutation importance.

    For every tree and feature, the OOB MSE after permuting that feature's
    values among the tree's OOB rows minus the unpermuted OOB MSE. The raw
    score averages these differences over trees; the normalized score divides
    by their standard deviation across trees and sets the ranking.
    """
    if not forest.params.bootstrap:
        raise ValueError("permutation importance needs out-of-bag rows (bootstrap=True)")
    M = as_matrix(X, forest.features)
    y = np.asarray(y, dtype=float)
    workers = _workers(n_jobs)
    ts = range(len(forest.trees))
    if workers == 1:
        diffs = [tree_permutation_diffs(forest, M, y, t, perm_seed) for t in ts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            diffs = list(pool.map(lambda t: tree_permutation_diffs(forest, M, y, t, perm_seed), ts))
    D = np.vstack(diffs)
    raw = D.mean(axis=0)
    sd = D.std(axis=0, ddof=1) if D.shape[0] > 1 else np.zeros(D.shape[1])
    norm = np.where(sd > 0, raw / np.where(sd > 0, sd, 1.0), 0.0)
    oob = oob_error(forest, _columns(M, forest.features), y)
    names = forest.features
    ranking = sorted(names, key=lambda f: (-norm[names.index(f)], feature_key(f)))
    return ImportanceReport(
        tuple(names),
        {f: float(raw[j]) for j, f in enumerate(names)},
        {f: float(sd[j]) for j, f in enumerate(names)},
        {f: float(norm[j]) for j, f in enumerate(names)},
        {f: float(100.0 * raw[j] / oob) if oob > 0 else 0.0 for j, f in enumerate(names)},
        oob,
        tuple(ranking),
    )


def _columns(M: np.ndarray, names: Sequence[str]) -> Mapping[str, np.ndarray]:
    return {f: M[:, j] for j, f in enumerate(names)}
