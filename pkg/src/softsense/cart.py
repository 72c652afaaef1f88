"""CART regression trees: variance-reduction growth and cost-complexity pruning."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .dataio import Dataset, as_matrix, canonical
from .errors import MissingFeatureError


@dataclass(frozen=True)
class GrowParams:
    """Stopping and pruning controls for one tree.

    The defaults (min_split=20, min_leaf=7, cp=0.01, max_depth=30) are those of
    the classic ``rpart`` implementation.
    """

    min_split: int = 20
    min_leaf: int = 7
    cp: float = 0.01
    max_depth: int = 30
    feature_subsample: Optional[int] = None

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if 2 * self.min_leaf > self.min_split:
            raise ValueError("min_split must be at least 2 * min_leaf")
        if self.cp < 0:
            raise ValueError("cp must be non-negative")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.feature_subsample is not None and self.feature_subsample < 1:
            raise ValueError("feature_subsample must be >= 1")


# Forest members: unpruned, smaller leaves.
FOREST_GROW = GrowParams(min_split=10, min_leaf=5, cp=0.0, max_depth=30)


@dataclass(frozen=True)
class SplitSpec:
    feature: str
    threshold: float
    gain: float


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat preorder node arrays; ``feature[i] == -1`` marks a leaf.

    ``sse`` and ``gain`` hold each node's training sum of squares and the
    reduction achieved by its split (0 for leaves); pruning reads both.
    """

    features: tuple[str, ...]
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    sse: np.ndarray
    gain: np.ndarray
    params: GrowParams

    family = "tree"

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def internal(self) -> np.ndarray:
        return np.flatnonzero(self.feature >= 0)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    @property
    def fraction(self) -> np.ndarray:
        return self.n_samples / self.n_samples[0]

    def predict(self, X) -> np.ndarray:
        return predict_tree(self, X)

    def to_dict(self) -> dict:
        nodes = [
            [int(f), float(t), int(l), int(r), float(v), int(n), float(s), float(g)]
            for f, t, l, r, v, n, s, g in zip(
                self.feature, self.threshold, self.left, self.right,
                self.value, self.n_samples, self.sse, self.gain,
            )
        ]
        return {"features": list(self.features), "params": asdict(self.params), "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        cols = list(zip(*d["nodes"]))
        ints = lambda c: np.array(c, dtype=np.int64)
        floats = lambda c: np.array(c, dtype=float)
        return cls(
            tuple(d["features"]),
            ints(cols[0]), floats(cols[1]), ints(cols[2]), ints(cols[3]),
            floats(cols[4]), ints(cols[5]), floats(cols[6]), floats(cols[7]),
            GrowParams(**d["params"]),
        )


def _counts(rows, n) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    return np.bincount(rows, minlength=n).astype(np.int64)


def sort_order(M: np.ndarray) -> np.ndarray:
    """Per-feature stable argsort, shape (p, n), as consumed by the kernels."""
    return np.ascontiguousarray(np.argsort(M, axis=0, kind="stable").T.astype(np.int64))


def best_split(rows, X, y, candidate_features: Sequence[str], params: GrowParams) -> Optional[SplitSpec]:
    """Split of ``rows`` with the largest SSE reduction among ``candidate_features``.

    Both children must keep ``params.min_leaf`` rows. Ties go to the earlier
    feature (A < B < ... < H), then the smaller threshold. Returns None when no
    admissible split reduces the SSE.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size < params.min_split:
        raise ValueError(f"{rows.size} rows is below min_split={params.min_split}")
    names = canonical(candidate_features)
    M = as_matrix(X, names)
    y = np.asarray(y, dtype=float)
    f, t, g, _ = _kernels.find_split(
        M, y, sort_order(M), _counts(rows, M.shape[0]), np.arange(len(names)), params.min_leaf
    )
    if f < 0:
        return None
    return SplitSpec(names[f], float(t), float(g))


def _seed_from(rng) -> int:
    if rng is None:
        return 0
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return int(rng)


def grow_matrix(M, y, order, counts, params: GrowParams, seed: int, features: Sequence[str]) -> Tree:
    p = M.shape[1]
    mtry = p if params.feature_subsample is None else min(params.feature_subsample, p)
    arrays = _kernels.grow(M, y, order, counts, params.min_split, params.min_leaf,
                           params.max_depth, mtry, np.uint64(seed))
    return Tree(tuple(features), *arrays, params)


def grow_tree(rows, X, y, params: GrowParams = GrowParams(), rng=None,
              features: Sequence[str] | None = None) -> Tree:
    """Grow an unpruned tree on ``rows`` (repeats allowed) of ``X``/``y``.

    With ``params.feature_subsample`` set, each node considers a random subset
    of that many features drawn from a stream seeded by ``rng`` (an int or a
    numpy Generator).
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("cannot grow a tree on zero rows")
    columns = X.columns if isinstance(X, Dataset) else X
    names = canonical(columns if features is None else features)
    M = as_matrix(X, names)
    y = np.asarray(y, dtype=float)
    return grow_matrix(M, y, sort_order(M), _counts(rows, M.shape[0]), params, _seed_from(rng), names)


def _subtree(tree: Tree, keep_leaf: np.ndarray) -> Tree:
    """Copy of ``tree`` with every node in ``keep_leaf`` turned into a leaf."""
    old_ids = []
    stack = [0]
    while stack:
        i = stack.pop()
        old_ids.append(i)
        if tree.feature[i] >= 0 and not keep_leaf[i]:
            stack.append(tree.right[i])
            stack.append(tree.left[i])
    old_ids = np.array(old_ids, dtype=np.int64)
    new_id = np.full(tree.n_nodes, -1, dtype=np.int64)
    new_id[old_ids] = np.arange(old_ids.size)
    collapsed = keep_leaf[old_ids] | (tree.feature[old_ids] < 0)
    feature = np.where(collapsed, -1, tree.feature[old_ids])
    left = np.where(collapsed, -1, new_id[tree.left[old_ids]])
    right = np.where(collapsed, -1, new_id[tree.right[old_ids]])
    return Tree(
        tree.features, feature.astype(np.int64),
        np.where(collapsed, 0.0, tree.threshold[old_ids]),
        left.astype(np.int64), right.astype(np.int64),
        tree.value[old_ids].copy(), tree.n_samples[old_ids].copy(),
        tree.sse[old_ids].copy(), np.where(collapsed, 0.0, tree.gain[old_ids]),
        tree.params,
    )


def prune_tree(tree: Tree, cp: float | None = None) -> Tree:
    """Cost-complexity pruning at complexity ``cp`` (relative to the root SSE).

    A subtree is collapsed when its SSE reduction per split, as a share of the
    root SSE, is below ``cp``. Computed bottom-up: for penalty a = cp * SSE(root)
    the cheapest pruning of each node costs min(SSE + a, cost(left) + cost(right)),
    which yields the same tree as repeatedly removing the weakest link.
    """
    cp = tree.params.cp if cp is None else cp
    root_sse = tree.sse[0]
    if cp <= 0 or tree.n_nodes == 1 or root_sse <= 0:
        return tree
    alpha = cp * root_sse
    cost = np.empty(tree.n_nodes)
    collapse = np.zeros(tree.n_nodes, dtype=bool)
    for i in range(tree.n_nodes - 1, -1, -1):
        if tree.feature[i] < 0:
            cost[i] = tree.sse[i] + alpha
            continue
        below = cost[tree.left[i]] + cost[tree.right[i]]
        as_leaf = tree.sse[i] + alpha
        if as_leaf < below:
            collapse[i] = True
            cost[i] = as_leaf
        else:
            cost[i] = below
    if not collapse.any():
        return tree
    return _subtree(tree, collapse)


def _prediction_matrix(tree: Tree, X) -> np.ndarray:
    columns = X.columns if isinstance(X, Dataset) else X
    if not isinstance(columns, Mapping):
        raise TypeError("X must be a Dataset or a mapping of feature name -> values")
    used = set(np.unique(tree.feature[tree.feature >= 0]).tolist())
    n = None
    cols = []
    for j, name in enumerate(tree.features):
        if name in columns:
            col = np.atleast_1d(np.asarray(columns[name], dtype=float))
        elif j in used:
            raise MissingFeatureError(name)
        else:
            col = None
        if col is not None:
            n = col.shape[0] if n is None else n
        cols.append(col)
    if n is None:
        n = len(np.atleast_1d(next(iter(columns.values())))) if columns else 1
    M = np.empty((n, len(tree.features)))
    for j, col in enumerate(cols):
        M[:, j] = np.nan if col is None else col
    return M


def predict_tree(tree: Tree, X):
    """Route each row through ``tree`` (x <= threshold goes left).

    ``X`` maps feature names to columns or scalars; only features referenced
    by a split are required. Scalar input returns a float.
    """
    columns = X.columns if isinstance(X, Dataset) else X
    scalar = isinstance(columns, Mapping) and all(np.ndim(v) == 0 for v in columns.values())
    M = _prediction_matrix(tree, X)
    out = _kernels.predict(tree.feature, tree.threshold, tree.left, tree.right, tree.value, M)
    return float(out[0]) if scalar else out


def used_features(tree: Tree) -> set[str]:
    return {tree.features[j] for j in np.unique(tree.feature[tree.feature >= 0])}


def export_dot(tree: Tree) -> str:
    """Graphviz digraph; every node shows its prediction and share of training rows."""
    lines = ["digraph Tree {", 'node [shape=box, style="rounded", fontname="helvetica"] ;']
    frac = tree.fraction
    for i in range(tree.n_nodes):
        body = f"{tree.value[i]:.3f}\\n{100 * frac[i]:.1f}%"
        if tree.feature[i] >= 0:
            body = f"{tree.features[tree.feature[i]]} ≤ {tree.threshold[i]:.3f}\\n" + body
        lines.append(f'{i} [label="{body}"] ;')
    for i in tree.internal:
        lines.append(f'{i} -> {tree.left[i]} [label="yes"] ;')
        lines.append(f'{i} -> {tree.right[i]} [label="no"] ;')
    lines.append("}")
    return "\n".join(lines) + "\n"
