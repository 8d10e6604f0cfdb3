import json
import math

import numpy as np
import pytest

import rfcontrib as rc
from rfcontrib.data import Dataset
from rfcontrib.errors import DataError, ModelConsistencyError, SchemaError
from rfcontrib.forest import (
    Forest,
    best_split,
    gini_impurity,
    leaf_indices,
    predict_proba,
    vote_counts,
)

from helpers import tree_leaf


def test_gini_known_values():
    assert gini_impurity([1.0, 0.0]) == 0.0
    assert gini_impurity([0.5, 0.5]) == 0.5
    assert abs(gini_impurity([3 / 7, 4 / 7]) - 24 / 49) < 1e-15


def test_best_split_pure_node_none(toy):
    assert best_split(toy, [5, 6, 8]) is None


def test_best_split_toy_rows_on_f4(toy):
    feat, thr, gain = best_split(toy, [3, 4, 7], candidate_features=[3])
    assert feat == 3
    assert thr == pytest.approx(1.55, abs=1e-12)
    assert gain == pytest.approx(4 / 9, abs=1e-15)


def test_best_split_prefers_lowest_feature_on_ties(toy):
    # every feature separates {x4,x5} from {x8} perfectly on these rows
    feat, thr, gain = best_split(toy, [3, 4, 7])
    assert feat == 0
    assert thr == pytest.approx((5.5 + 6.0) / 2)
    assert gain == pytest.approx(4 / 9, abs=1e-15)


def test_best_split_identical_rows_none():
    ds = Dataset(("a", "b"), np.ones((2, 2)), np.array([0, 1]), ("x", "y"))
    assert best_split(ds, [0, 1]) is None


def test_best_split_threshold_is_midpoint():
    X = np.array([[1.0], [2.0], [4.0]])
    ds = Dataset(("a",), X, np.array([0, 0, 1]), ("x", "y"))
    feat, thr, gain = best_split(ds, [0, 1, 2])
    assert (feat, thr) == (0, 3.0)


def test_fit_forced_bags_reproduce_fixture_roots(toy, toy_forest):
    bags = [t.bag for t in toy_forest.trees]
    grown = rc.fit(toy, np.arange(10), rc.ForestParams(trees=2, seed=7), bags=bags)
    assert np.allclose(grown.trees[0].y_mean[0], [4 / 7, 3 / 7], atol=1e-15)
    assert np.allclose(grown.trees[1].y_mean[0], [3 / 7, 4 / 7], atol=1e-15)
    assert np.allclose(grown.y_root_avg, [0.5, 0.5], atol=1e-15)


def test_fit_single_instance_leaf(toy):
    f = rc.fit(toy, [5], rc.ForestParams(trees=1, seed=3))
    tree = f.trees[0]
    assert tree.n_nodes == 1
    assert tree.feature[0] == -1
    assert tree.y_mean[0].tolist() == [0.0, 1.0]


def test_single_leaf_forest_predicts_one_hot(toy):
    f = rc.fit(toy, [5], rc.ForestParams(trees=3, seed=3))
    assert predict_proba(f, toy.X[0]).tolist() == [0.0, 1.0]
    pred, tie = rc.predict(f, toy.X)
    assert set(pred.tolist()) == {1}
    assert not tie.any()


def test_fixture_forest_vote_fractions(toy, toy_forest):
    proba = predict_proba(toy_forest, toy.X)
    assert proba[0, 1] == 0.0
    assert proba[7, 1] == 0.5
    assert np.array_equal(proba[:, 1], np.array([0, 0, 0, 0, 0, 1, 1, 0.5, 1, 0.5]))


def test_fixture_forest_predictions_and_ties(toy, toy_forest):
    pred, tie = rc.predict(toy_forest, toy.X)
    assert pred[0] == 0 and not tie[0]
    assert tie[7] and tie[9]
    assert not tie[[0, 1, 2, 3, 4, 5, 6, 8]].any()


def test_skewed_votes_decide_without_tie(toy):
    f3 = rc.fit(toy, [0], rc.ForestParams(trees=3, seed=1))
    f7 = rc.fit(toy, [5], rc.ForestParams(trees=7, seed=1))
    mixed = Forest(
        trees=f3.trees + f7.trees,
        feature_names=toy.feature_names,
        class_names=toy.class_names,
        params=rc.ForestParams(trees=10, mtry=2, seed=1),
        train_indices=np.array([0, 5]),
        y_root_avg=np.array([0.3, 0.7]),
    )
    proba = predict_proba(mixed, toy.X[2])
    assert proba.tolist() == [0.3, 0.7]
    for tie_seed in (1, 2, 99):
        pred, tie = rc.predict(mixed, toy.X, tie_seed=tie_seed)
        assert set(pred.tolist()) == {1}
        assert not tie.any()


def test_tie_resolution_depends_on_row_id_not_batch_position(toy, toy_forest):
    pred_all, _ = rc.predict(toy_forest, toy.X, tie_seed=5)
    pred_one, tie_one = rc.predict(toy_forest, toy.X[7], tie_seed=5, row_ids=[7])
    assert tie_one
    assert pred_one == pred_all[7]


def test_unanimity_holds_when_grown_to_purity(toy):
    f = rc.fit(toy, np.arange(10), rc.ForestParams(trees=12, seed=2))
    assert rc.check_unanimity(f)


def test_mtry_default_is_floor_sqrt():
    assert rc.ForestParams(trees=1).resolve_mtry(17) == 4
    assert rc.ForestParams(trees=1).resolve_mtry(4) == 2
    assert rc.ForestParams(trees=1).resolve_mtry(1) == 1


def test_fit_input_validation(toy):
    with pytest.raises(DataError):
        rc.fit(toy, [], rc.ForestParams(trees=1))
    with pytest.raises(DataError):
        rc.fit(toy, [0, 0], rc.ForestParams(trees=1))
    with pytest.raises(DataError):
        rc.fit(toy, [0, 99], rc.ForestParams(trees=1))
    with pytest.raises(DataError):
        rc.fit(toy, [0, 1], rc.ForestParams(trees=0))
    with pytest.raises(DataError):
        rc.fit(toy, [0, 1], rc.ForestParams(trees=1, mtry=9))


def test_leaf_indices_matches_scalar_walk(toy, toy_forest):
    for tree in toy_forest.trees:
        vec = leaf_indices(tree, toy.X)
        walked = [tree_leaf(tree, x) for x in toy.X]
        assert vec.tolist() == walked


def test_vote_counts_sum_to_trees(toy, toy_forest):
    counts = vote_counts(toy_forest, toy.X)
    assert (counts.sum(axis=1) == toy_forest.n_trees).all()


def test_save_load_roundtrip(tmp_path, toy, toy_forest):
    path = tmp_path / "m.json"
    rc.save(toy_forest, path)
    back = rc.load(path)
    assert back.feature_names == toy_forest.feature_names
    assert back.class_names == toy_forest.class_names
    p0, t0 = rc.predict(toy_forest, toy.X)
    p1, t1 = rc.predict(back, toy.X)
    assert np.array_equal(p0, p1) and np.array_equal(t0, t1)
    path2 = tmp_path / "m2.json"
    rc.save(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_save_is_deterministic(tmp_path, toy):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    rc.save(rc.fit(toy, np.arange(10), rc.ForestParams(trees=5, seed=9)), a)
    rc.save(rc.fit(toy, np.arange(10), rc.ForestParams(trees=5, seed=9), threads=3), b)
    assert a.read_bytes() == b.read_bytes()


def test_load_rejects_corrupt_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ not json")
    with pytest.raises(SchemaError):
        rc.load(path)
    path.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(SchemaError):
        rc.load(path)


def test_load_rejects_distribution_not_summing_to_one(tmp_path, toy_forest):
    path = tmp_path / "m.json"
    rc.save(toy_forest, path)
    doc = json.loads(path.read_text())
    doc["trees"][0]["nodes"][0]["y_mean"] = [0.4, 0.5]
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelConsistencyError):
        rc.load(path)


def test_load_rejects_inconsistent_child_counts(tmp_path, toy_forest):
    path = tmp_path / "m.json"
    rc.save(toy_forest, path)
    doc = json.loads(path.read_text())
    doc["trees"][0]["nodes"][1]["n_train"] += 1
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelConsistencyError):
        rc.load(path)


def test_forced_bag_multiset_respected(toy):
    bag = np.array([0, 0, 5, 5, 5, 8])
    f = rc.fit(toy, np.arange(10), rc.ForestParams(trees=1, seed=4), bags=[bag])
    tree = f.trees[0]
    assert np.array_equal(tree.bag, np.sort(bag))
    assert tree.n_node[0] == 6
    assert np.allclose(tree.y_mean[0], [2 / 6, 4 / 6], atol=1e-15)
    with pytest.raises(DataError):
        rc.fit(toy, [0, 1], rc.ForestParams(trees=1), bags=[np.array([5])])


def test_min_node_size_stops_growth(toy):
    f = rc.fit(toy, np.arange(10), rc.ForestParams(trees=1, seed=4, min_node_size=50))
    tree = f.trees[0]
    assert tree.n_nodes == 1
    assert tree.feature[0] == -1


def test_grown_tree_children_partition_parent(toy):
    f = rc.fit(toy, np.arange(10), rc.ForestParams(trees=8, seed=11))
    for tree in f.trees:
        for node in range(tree.n_nodes):
            if tree.feature[node] >= 0:
                left, right = int(tree.left[node]), int(tree.right[node])
                assert tree.n_node[node] == tree.n_node[left] + tree.n_node[right]
                blend = (
                    tree.n_node[left] * tree.y_mean[left]
                    + tree.n_node[right] * tree.y_mean[right]
                ) / tree.n_node[node]
                assert np.allclose(blend, tree.y_mean[node], atol=1e-12)


def test_gain_matches_impurity_drop_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(25):
        n = int(rng.integers(3, 12))
        X = np.round(rng.normal(size=(n, 3)), 1)
        y = rng.integers(0, 2, size=n)
        if len(set(y.tolist())) < 2:
            y[0] = 1 - y[0]
        ds = Dataset(("a", "b", "c"), X, y.astype(np.int64), ("x", "y"))
        got = best_split(ds, np.arange(n))
        best = None
        base = gini_impurity(np.bincount(y, minlength=2) / n)
        for f in range(3):
            vals = np.unique(X[:, f])
            for lo, hi in zip(vals[:-1], vals[1:]):
                thr = (lo + hi) / 2.0
                mask = X[:, f] <= thr
                nl, nr = int(mask.sum()), int((~mask).sum())
                gl = gini_impurity(np.bincount(y[mask], minlength=2) / nl)
                gr = gini_impurity(np.bincount(y[~mask], minlength=2) / nr)
                gain = base - (nl * gl + nr * gr) / n
                if gain > 1e-15 and (best is None or gain > best[2] + 1e-15):
                    best = (f, thr, gain)
        if best is None:
            assert got is None
        else:
            assert got is not None
            assert got[2] == pytest.approx(best[2], abs=1e-12)


def test_hyperparams_roundtrip_in_json(tmp_path, toy):
    f = rc.fit(toy, np.arange(10), rc.ForestParams(trees=3, mtry=2, min_node_size=2, seed=5))
    path = tmp_path / "m.json"
    rc.save(f, path)
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1
    assert doc["hyperparams"]["trees"] == 3
    assert doc["hyperparams"]["mtry"] == 2
    assert doc["hyperparams"]["min_node_size"] == 2
    assert doc["hyperparams"]["seed"] == 5
    assert doc["class_names"] == ["versicolor", "virginica"]
    back = rc.load(path)
    assert back.params.mtry == 2 and back.params.min_node_size == 2
