import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softsense.cart import FOREST_GROW, GrowParams, grow_tree, predict_tree
from softsense.dataio import FEATURES
from softsense.forest import (
    Forest,
    ForestParams,
    fit_forest,
    oob_error,
    oob_predictions,
    permutation_importance,
    predict_forest,
)

from test_cart import cols


def data(seed, n=200, p=4, signal=True):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, p))
    y = (2 * M[:, 0] - M[:, 1] if signal else 0.0) + 0.5 * rng.standard_normal(n)
    return cols(M), y


def test_default_params():
    p = ForestParams()
    assert p.n_trees == 100 and p.bootstrap
    assert [p.resolved_mtry(k) for k in (1, 2, 3, 8, 9)] == [1, 1, 1, 2, 3]


@pytest.mark.parametrize("bad", [dict(n_trees=0), dict(mtry=0)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        fit_forest(*data(0, n=30), ForestParams(**bad))


def test_mtry_above_p_rejected():
    with pytest.raises(ValueError):
        fit_forest(*data(0, n=30, p=2), ForestParams(n_trees=2, mtry=3))


def test_degenerate_forest_equals_single_tree():
    X, y = data(1)
    forest = fit_forest(X, y, ForestParams(n_trees=1, bootstrap=False, mtry=4))
    tree = grow_tree(np.arange(200), X, y, FOREST_GROW)
    assert np.array_equal(forest.predict(X), predict_tree(tree, X))
    assert forest.oob_rows(0).size == 0


def test_same_seed_same_predictions():
    X, y = data(2)
    a = fit_forest(X, y, ForestParams(n_trees=10, seed=5))
    b = fit_forest(X, y, ForestParams(n_trees=10, seed=5))
    c = fit_forest(X, y, ForestParams(n_trees=10, seed=6))
    assert np.array_equal(a.predict(X), b.predict(X))
    assert not np.array_equal(a.predict(X), c.predict(X))


@pytest.mark.parametrize("seed", range(3))
def test_serial_and_parallel_identical(seed):
    X, y = data(seed)
    params = ForestParams(n_trees=12, seed=seed)
    serial = fit_forest(X, y, params, n_jobs=1)
    parallel = fit_forest(X, y, params, n_jobs=4)
    assert serial.serialize() == parallel.serialize()
    ra = permutation_importance(serial, X, y, 3, n_jobs=1)
    rb = permutation_importance(parallel, X, y, 3, n_jobs=4)
    assert ra == rb


def test_predict_is_mean_of_trees():
    X, y = data(3)
    forest = fit_forest(X, y, ForestParams(n_trees=7, seed=1))
    manual = np.zeros(200)
    for tree in forest.trees:
        manual += predict_tree(tree, X)
    assert np.allclose(predict_forest(forest, X), manual / 7, rtol=0, atol=1e-12)
    reversed_forest = Forest(forest.trees[::-1], forest.params, forest.features, forest.n_train,
                             forest.counts[::-1])
    assert np.allclose(reversed_forest.predict(X), forest.predict(X), atol=1e-12)


def test_single_leaf_trees_predict_constant():
    X = {"A": np.arange(30.0)}
    forest = fit_forest(X, np.full(30, 2.5), ForestParams(n_trees=4))
    assert np.all(forest.predict(X) == 2.5)


def test_bootstrap_multisets():
    X, y = data(4, n=500)
    forest = fit_forest(X, y, ForestParams(n_trees=100, seed=0))
    coverage = np.zeros(500)
    for t in range(100):
        boot = forest.bootstrap_rows(t)
        assert boot.size == 500
        assert np.array_equal(forest.oob_rows(t), np.setdiff1d(np.arange(500), boot))
        coverage[forest.oob_rows(t)] += 1
    assert coverage.min() >= 1
    assert coverage.mean() == pytest.approx(100 * (1 - 1 / 500) ** 500, rel=0.05)


def test_oob_error_matches_membership_oracle():
    X, y = data(5)
    forest = fit_forest(X, y, ForestParams(n_trees=25, seed=2))
    preds = [predict_tree(t, X) for t in forest.trees]
    errs = []
    for i in range(200):
        members = [preds[t][i] for t in range(25) if forest.counts[t][i] == 0]
        if members:
            errs.append((np.mean(members) - y[i]) ** 2)
    assert oob_error(forest, X, y) == pytest.approx(np.mean(errs), rel=1e-12)


def test_oob_of_constant_trees_is_population_variance():
    X = {"A": np.zeros(50)}
    y = np.random.default_rng(0).standard_normal(50)
    forest = fit_forest(X, y, ForestParams(n_trees=30, seed=1))
    # every tree is one leaf predicting its bootstrap mean; replace with the full mean
    for tree in forest.trees:
        tree.value[:] = y.mean()
    assert oob_error(forest, X, y) == pytest.approx(np.var(y), abs=1e-9)


def test_oob_requires_bootstrap():
    X, y = data(6, n=40)
    forest = fit_forest(X, y, ForestParams(n_trees=2, bootstrap=False))
    with pytest.raises(ValueError):
        oob_error(forest, X, y)
    with pytest.raises(ValueError):
        permutation_importance(forest, X, y)


def test_uncovered_rows_reported(caplog):
    X, y = data(7, n=20)
    forest = fit_forest(X, y, ForestParams(n_trees=1, seed=0))
    _, hits = oob_predictions(forest, X)
    assert (hits == 0).any()
    oob_error(forest, X, y)
    assert "excluded" in caplog.text


@pytest.mark.parametrize("seed", range(5))
def test_planted_signal_ranks_first(seed):
    rng = np.random.default_rng(seed)
    x1, x2 = rng.standard_normal(300), rng.standard_normal(300)
    X = {"A": x2, "B": x1}
    forest = fit_forest(X, x1, ForestParams(n_trees=30, seed=seed, mtry=1))
    rep = permutation_importance(forest, X, x1, seed)
    assert rep.normalized["B"] > rep.normalized["A"]
    assert rep.ranking[0] == "B"


def test_independent_target_scores_small():
    scores = []
    for seed in range(20):
        X, y = data(seed, n=150, signal=False)
        forest = fit_forest(X, y, ForestParams(n_trees=20, seed=seed))
        rep = permutation_importance(forest, X, y, seed)
        scores.append([rep.normalized[f] for f in X])
    scores = np.abs(np.array(scores))
    assert scores.max() < 1.5
    per_feature = scores.mean(axis=0)
    assert per_feature.max() < 3 * per_feature.min()


def test_report_fields_consistent():
    X, y = data(8)
    forest = fit_forest(X, y, ForestParams(n_trees=20, seed=3))
    rep = permutation_importance(forest, X, y, 1)
    assert sorted(rep.ranking) == sorted(forest.features)
    for f in rep.features:
        assert rep.percent_inc_mse[f] == pytest.approx(100 * rep.raw_increase[f] / rep.oob_mse)
        if rep.sd[f] > 0:
            assert rep.normalized[f] == pytest.approx(rep.raw_increase[f] / rep.sd[f])
    keys = [(-rep.normalized[f], FEATURES.index(f)) for f in rep.ranking]
    assert keys == sorted(keys)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "feature,normalized" and len(lines) == 5


def test_constant_feature_scores_zero():
    X, y = data(9)
    X["D"] = np.ones(200)
    forest = fit_forest(X, y, ForestParams(n_trees=15, seed=0))
    rep = permutation_importance(forest, X, y, 0)
    assert rep.raw_increase["D"] == 0.0 and rep.normalized["D"] == 0.0


@settings(max_examples=10)
@given(st.integers(0, 2**31), st.floats(0.1, 10), st.floats(-5, 5))
def test_ranking_invariant_under_common_rescaling(seed, a, b):
    X, y = data(seed % 1000, n=120)
    params = ForestParams(n_trees=8, seed=seed)
    rep = permutation_importance(fit_forest(X, y, params), X, y, 7)
    Xs = {f: a * v + b for f, v in X.items()}
    rep_s = permutation_importance(fit_forest(Xs, y, params), Xs, y, 7)
    assert rep.ranking == rep_s.ranking
    assert rep.normalized == rep_s.normalized


def test_serialization_round_trip():
    X, y = data(10)
    forest = fit_forest(X, y, ForestParams(n_trees=6, seed=4))
    back = Forest.from_dict(forest.to_dict())
    assert np.array_equal(back.predict(X), forest.predict(X))
    assert all(np.array_equal(a, b) for a, b in zip(back.counts, forest.counts))
    assert back.serialize() == forest.serialize()
