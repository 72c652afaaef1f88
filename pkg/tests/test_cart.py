import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softsense.cart import (
    FOREST_GROW,
    GrowParams,
    Tree,
    best_split,
    export_dot,
    grow_tree,
    predict_tree,
    prune_tree,
    used_features,
)
from softsense.dataio import FEATURES
from softsense.errors import MissingFeatureError

from oracles import brute_force_split, brute_force_tree, route, weakest_link_prune

STUMP_X = {"A": np.array([1.0, 2.0, 3.0, 4.0])}
STUMP_Y = np.array([0.0, 0.0, 1.0, 1.0])
STUMP_PARAMS = GrowParams(min_split=4, min_leaf=1, cp=0.0)


def cols(M):
    return {FEATURES[j]: M[:, j] for j in range(M.shape[1])}


def random_problem(rng, n_max=12, p_max=3):
    n = int(rng.integers(2, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    if rng.random() < 0.5:
        M = rng.integers(0, 4, (n, p)).astype(float)  # heavy ties
    else:
        M = rng.standard_normal((n, p))
    y = rng.integers(-12, 13, n) / 4.0  # dyadic: exact sums
    min_leaf = int(rng.integers(1, 4))
    min_split = int(rng.integers(2 * min_leaf, 2 * min_leaf + 4))
    max_depth = int(rng.integers(1, 6))
    return M, y, GrowParams(min_split=min_split, min_leaf=min_leaf, cp=0.0, max_depth=max_depth)


def test_stump_example():
    s = best_split(np.arange(4), STUMP_X, STUMP_Y, ["A"], STUMP_PARAMS)
    assert (s.feature, s.threshold) == ("A", 2.5)
    assert s.gain == pytest.approx(1.0)


def test_constant_target_has_no_split():
    assert best_split(np.arange(4), STUMP_X, np.ones(4), ["A"], STUMP_PARAMS) is None
    tree = grow_tree(np.arange(4), STUMP_X, np.full(4, 3.5), STUMP_PARAMS)
    assert tree.n_nodes == 1 and tree.value[0] == 3.5 and tree.fraction[0] == 1.0


def test_best_split_requires_min_split():
    with pytest.raises(ValueError):
        best_split(np.arange(3), STUMP_X, STUMP_Y, ["A"], STUMP_PARAMS)


def test_empty_rows_rejected():
    with pytest.raises(ValueError):
        grow_tree(np.array([], dtype=int), STUMP_X, STUMP_Y)


def test_stump_tree_and_prediction():
    tree = grow_tree(np.arange(4), STUMP_X, STUMP_Y, STUMP_PARAMS)
    assert tree.n_nodes == 3
    assert predict_tree(tree, {"A": 1.7}) == 0.0
    assert predict_tree(tree, {"A": 3.2}) == 1.0
    assert used_features(tree) == {"A"}


def test_tie_break_prefers_earlier_feature():
    X = {"A": np.array([1.0, 2, 3, 4]), "B": np.array([1.0, 2, 3, 4])}
    s = best_split(np.arange(4), X, STUMP_Y, ["B", "A"], STUMP_PARAMS)
    assert s.feature == "A"


def test_tie_break_prefers_smaller_threshold():
    y = np.array([0.0, 1.0, 0.0, 1.0])
    s = best_split(np.arange(4), {"A": np.array([1.0, 2, 3, 4])}, y, ["A"], STUMP_PARAMS)
    oracle = brute_force_split(np.array([[1.0], [2], [3], [4]]), y, range(4), 1)
    assert s.threshold == oracle[1] == 1.5


@pytest.mark.parametrize("seed", range(40))
def test_best_split_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((12, 3))
    y = rng.integers(-8, 9, 12) / 2.0
    params = GrowParams(min_split=4, min_leaf=2)
    got = best_split(np.arange(12), cols(M), y, list(FEATURES[:3]), params)
    want = brute_force_split(M, y, range(12), 2)
    if want is None:
        assert got is None
    else:
        assert (FEATURES.index(got.feature), got.threshold) == want[:2]
        assert got.gain == pytest.approx(float(want[2]), rel=1e-9)


def assert_matches_oracle(tree: Tree, nodes, M, rng):
    assert tree.n_nodes == len(nodes)
    for i, node in enumerate(nodes):
        assert tree.feature[i] == node["feature"]
        assert tree.threshold[i] == node["threshold"]
        assert tree.left[i] == node["left"] and tree.right[i] == node["right"]
        assert tree.value[i] == node["value"]
        assert tree.n_samples[i] == node["n"]
    queries = np.vstack([M, rng.standard_normal((20, M.shape[1])) * 2])
    got = predict_tree(tree, cols(queries))
    want = [route([n["feature"] for n in nodes], [n["threshold"] for n in nodes],
                  [n["left"] for n in nodes], [n["right"] for n in nodes],
                  [n["value"] for n in nodes], q) for q in queries]
    assert np.array_equal(got, want)


@pytest.mark.parametrize("block", range(10))
def test_grow_matches_exhaustive_oracle(block):
    rng = np.random.default_rng(1000 + block)
    for _ in range(20):
        M, y, params = random_problem(rng)
        rows = np.arange(len(y)) if rng.random() < 0.5 else rng.integers(0, len(y), len(y))
        tree = grow_tree(rows, cols(M), y, params)
        nodes = brute_force_tree(M, y, rows, params.min_split, params.min_leaf, params.max_depth)
        assert_matches_oracle(tree, nodes, M, rng)


def test_quadrant_target():
    rng = np.random.default_rng(5)
    M = rng.uniform(-1, 1, (10, 2))
    y = np.where(M[:, 0] > 0, 1.0, 0.0) + np.where(M[:, 1] > 0, 2.0, 0.0)
    params = GrowParams(min_split=2, min_leaf=1, cp=0.0)
    tree = grow_tree(np.arange(10), cols(M), y, params)
    assert_matches_oracle(tree, brute_force_tree(M, y, range(10), 2, 1, 30), M, rng)
    assert np.array_equal(predict_tree(tree, cols(M)), y)


def test_leaf_invariants():
    rng = np.random.default_rng(8)
    M = rng.standard_normal((200, 3))
    y = M[:, 0] + rng.standard_normal(200)
    tree = grow_tree(np.arange(200), cols(M), y, GrowParams(cp=0.0))
    assert tree.fraction[tree.leaves].sum() == pytest.approx(1.0, abs=1e-9)
    pred = predict_tree(tree, cols(M))
    for leaf in tree.leaves:
        members = np.flatnonzero(pred == tree.value[leaf])
        assert y[members].mean() == pytest.approx(tree.value[leaf], rel=1e-9)
    internal = tree.internal
    assert np.all(tree.left[internal] >= 0) and np.all(tree.right[internal] >= 0)
    assert np.sum((y - pred) ** 2) <= tree.sse[0]


def grown(seed, n=300):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, 3))
    y = np.sin(2 * M[:, 0]) + M[:, 1] * (M[:, 2] > 0) + 0.3 * rng.standard_normal(n)
    return grow_tree(np.arange(n), cols(M), y, GrowParams(min_split=6, min_leaf=3, cp=0.0)), M, y


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("cp", [0.001, 0.005, 0.01, 0.03, 0.1])
def test_prune_matches_weakest_link(seed, cp):
    tree, _, _ = grown(seed)
    pruned = prune_tree(tree, cp)
    collapsed = weakest_link_prune(tree, cp)
    expected_leaves = sorted(
        (tree.n_samples[i], tree.value[i]) for i in reachable_leaves(tree, collapsed)
    )
    assert sorted(zip(pruned.n_samples[pruned.leaves], pruned.value[pruned.leaves])) == expected_leaves


def reachable_leaves(tree, collapsed):
    out, stack = [], [0]
    while stack:
        i = stack.pop()
        if tree.feature[i] < 0 or i in collapsed:
            out.append(i)
        else:
            stack.extend([tree.left[i], tree.right[i]])
    return out


def test_prune_bounds():
    tree, _, _ = grown(1)
    assert prune_tree(tree, 0.0) is tree
    assert prune_tree(tree, 1.0).n_nodes == 1
    pruned = prune_tree(tree, 0.02)
    # collapsing only: each pruned leaf is a node of the grown tree with the same rows and mean
    grown_nodes = set(zip(tree.n_samples, tree.value))
    assert set(zip(pruned.n_samples, pruned.value)) <= grown_nodes
    assert pruned.n_nodes < tree.n_nodes
    assert set(zip(pruned.feature[pruned.internal], pruned.threshold[pruned.internal])) <= set(
        zip(tree.feature[tree.internal], tree.threshold[tree.internal]))


def test_perfect_single_split_survives_cp_one():
    tree = grow_tree(np.arange(4), STUMP_X, STUMP_Y, STUMP_PARAMS)
    assert prune_tree(tree, 1.0).n_nodes == 3


@given(st.integers(0, 2**31))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((60, 3))
    y = M[:, 0] * M[:, 1] + rng.standard_normal(60)
    params = GrowParams(min_split=6, min_leaf=2, cp=0.0)
    tree = grow_tree(np.arange(60), cols(M), y, params)
    Mt = M.copy()
    Mt[:, 1] = np.exp(Mt[:, 1]) * 3 + 1
    tt = grow_tree(np.arange(60), cols(Mt), y, params)
    assert np.array_equal(tree.feature, tt.feature)
    assert np.array_equal(tree.value, tt.value)
    assert np.array_equal(predict_tree(tree, cols(M)), predict_tree(tt, cols(Mt)))


@given(st.integers(0, 2**31))
def test_forest_mode_deterministic(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((80, 5))
    y = rng.standard_normal(80)
    params = GrowParams(10, 5, 0.0, 30, feature_subsample=2)
    a = grow_tree(np.arange(80), cols(M), y, params, rng=seed)
    b = grow_tree(np.arange(80), cols(M), y, params, rng=seed)
    assert a.to_dict() == b.to_dict()


def test_round_trip_dict():
    tree, M, _ = grown(3)
    back = Tree.from_dict(tree.to_dict())
    assert np.array_equal(predict_tree(back, cols(M)), predict_tree(tree, cols(M)))


def test_missing_referenced_feature():
    tree = grow_tree(np.arange(4), STUMP_X, STUMP_Y, STUMP_PARAMS)
    with pytest.raises(MissingFeatureError, match="A"):
        predict_tree(tree, {"B": np.ones(3)})
    leaf = grow_tree(np.arange(4), STUMP_X, np.ones(4), STUMP_PARAMS)
    assert predict_tree(leaf, {"B": 2.0}) == 1.0
    assert used_features(leaf) == set()


@pytest.mark.parametrize("bad", [dict(min_leaf=0), dict(min_split=5, min_leaf=3), dict(cp=-0.1)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        GrowParams(**bad)


def test_forest_grow_defaults():
    assert (FOREST_GROW.min_split, FOREST_GROW.min_leaf, FOREST_GROW.cp) == (10, 5, 0.0)
    assert (GrowParams().min_split, GrowParams().min_leaf, GrowParams().cp, GrowParams().max_depth) == (20, 7, 0.01, 30)


NODE_RE = re.compile(r'^(\d+) \[label="(.*)"\] ;$')
EDGE_RE = re.compile(r'^(\d+) -> (\d+) \[label="(yes|no)"\] ;$')


def parse_dot(text):
    lines = text.strip().splitlines()
    assert lines[0] == "digraph Tree {" and lines[-1] == "}"
    nodes = {int(m.group(1)): m.group(2) for m in map(NODE_RE.match, lines) if m}
    edges = [(int(m.group(1)), int(m.group(2))) for m in map(EDGE_RE.match, lines) if m]
    return nodes, edges


def test_dot_leaf_and_stump():
    leaf = grow_tree(np.arange(4), STUMP_X, np.ones(4), STUMP_PARAMS)
    nodes, edges = parse_dot(export_dot(leaf))
    assert len(nodes) == 1 and edges == []
    assert nodes[0] == "1.000\\n100.0%"
    nodes, edges = parse_dot(export_dot(grow_tree(np.arange(4), STUMP_X, STUMP_Y, STUMP_PARAMS)))
    assert len(nodes) == 3 and len(edges) == 2
    assert nodes[0] == "A ≤ 2.500\\n0.500\\n100.0%"
    assert nodes[1] == "0.000\\n50.0%"


@pytest.mark.parametrize("seed", range(5))
def test_dot_parse_back(seed):
    tree, _, _ = grown(seed, n=120)
    nodes, edges = parse_dot(export_dot(prune_tree(tree, 0.005)))
    internal = sum(1 for label in nodes.values() if "≤" in label)
    assert len(nodes) == 2 * internal + 1
    assert len(edges) == 2 * internal
    children = [c for _, c in edges]
    assert sorted(children) == sorted(set(nodes) - {0})
