"""Model-level analyses: Gini importance, OOB permutation importance, and the
multi-model robustness experiment over repeated independent splits."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .contrib import _raw_contributions, _require_stats
from .data import Dataset, SplitSpec
from .errors import DataError
from .forest import Forest, ForestParams, fit, leaf_indices, predict

_PARTITIONS = ("train", "test", "holdout")


def gini_importance(forest: Forest) -> np.ndarray:
    """Mean over trees of the size-weighted Gini decrease per split feature.

    Recomputed purely from stored node statistics: each internal node adds
    (n_node / n_root) * (parent impurity - weighted child impurity) to its
    split feature.
    """
    _require_stats(forest)
    imp = np.zeros(forest.n_features)
    for tree in forest.trees:
        gini = 1.0 - np.sum(tree.y_mean**2, axis=1)
        internal = np.nonzero(tree.feature >= 0)[0]
        if internal.size == 0:
            continue
        l = tree.left[internal]
        r = tree.right[internal]
        n = tree.n_node[internal].astype(np.float64)
        child_mix = (tree.n_node[l] * gini[l] + tree.n_node[r] * gini[r]) / n
        gain = gini[internal] - child_mix
        np.add.at(imp, tree.feature[internal], (n / tree.n_node[0]) * gain)
    return imp / forest.n_trees


def oob_accuracy(forest: Forest, ds: Dataset) -> float:
    """Accuracy of aggregated out-of-bag votes over covered training rows."""
    _require_stats(forest)
    if ds.feature_names != forest.feature_names:
        raise DataError("dataset feature names do not match the model")
    votes = np.zeros((ds.n_instances, forest.n_classes), dtype=np.int64)
    for tree in forest.trees:
        if tree.oob.size == 0:
            continue
        leaves = leaf_indices(tree, ds.X[tree.oob])
        votes[tree.oob, tree.majority[leaves]] += 1
    covered = votes.sum(axis=1) > 0
    if not covered.any():
        raise DataError("no row has out-of-bag votes")
    pred = np.argmax(votes[covered], axis=1)
    return float(np.mean(pred == ds.labels[covered]))


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple[str, ...]
    gini: np.ndarray
    permutation: np.ndarray
    oob_accuracy: float
    trees_with_oob: int
    repeats: int


def permutation_importance(
    forest: Forest, ds: Dataset, seed: int = 7, repeats: int = 5
) -> ImportanceReport:
    """Per-tree OOB permutation importance, averaged over seeded repeats.

    For each tree and each feature it actually splits on, the feature column
    is permuted within the tree's OOB block; the importance is the mean OOB
    accuracy drop over (trees with OOB rows) x repeats. Features unused by a
    tree are skipped there: their drop is exactly zero.
    """
    _require_stats(forest)
    if ds.feature_names != forest.feature_names:
        raise DataError("dataset feature names do not match the model")
    if repeats < 1:
        raise DataError("repeats must be >= 1")
    imp = np.zeros(forest.n_features)
    used_trees = 0
    for t, tree in enumerate(forest.trees):
        if tree.oob.size == 0:
            continue
        used_trees += 1
        Xo = ds.X[tree.oob]
        yo = ds.labels[tree.oob]
        base = float(np.mean(tree.majority[leaf_indices(tree, Xo)] == yo))
        used = np.unique(tree.feature[tree.feature >= 0])
        for f in used:
            drop = 0.0
            for p in range(repeats):
                rng = np.random.default_rng(
                    np.random.SeedSequence(seed, spawn_key=(t, int(f), p))
                )
                perm = rng.permutation(len(tree.oob))
                Xp = Xo.copy()
                Xp[:, f] = Xo[perm, f]
                acc = float(np.mean(tree.majority[leaf_indices(tree, Xp)] == yo))
                drop += base - acc
            imp[f] += drop / repeats
    if used_trees == 0:
        raise DataError("no tree has out-of-bag rows")
    return ImportanceReport(
        feature_names=forest.feature_names,
        gini=gini_importance(forest),
        permutation=imp / used_trees,
        oob_accuracy=oob_accuracy(forest, ds),
        trees_with_oob=used_trees,
        repeats=repeats,
    )


@dataclass(frozen=True)
class RobustnessConfig:
    models: int
    trees: int
    train_fraction: float = 2.0 / 3.0
    seed: int = 7
    holdout: int | None = None
    mtry: int | None = None
    min_node_size: int = 1


@dataclass
class RobustnessResult:
    """Raw per-model outcomes of the repeated-split experiment.

    Median tensors are (models, K, F), NaN where a model had no correctly
    classified row of a class; holdout_contribs is (models, F, K) toward every
    class for the excluded instance, or None.
    """

    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    config: RobustnessConfig
    accuracies: np.ndarray
    train_medians: np.ndarray
    test_medians: np.ndarray
    holdout_contribs: np.ndarray | None

    def quantile_rows(self):
        """(feature, class, partition, min, q25, median, q75, max) rows; the
        quantiles run over models, skipping NaN entries."""
        rows = []
        for partition in _PARTITIONS:
            if partition == "train":
                data = self.train_medians
            elif partition == "test":
                data = self.test_medians
            else:
                if self.holdout_contribs is None:
                    continue
                data = np.transpose(self.holdout_contribs, (0, 2, 1))
            for c, cname in enumerate(self.class_names):
                for f, fname in enumerate(self.feature_names):
                    vals = data[:, c, f]
                    vals = vals[~np.isnan(vals)]
                    if vals.size == 0:
                        stats = [float("nan")] * 5
                    else:
                        stats = [
                            float(np.min(vals)),
                            float(np.percentile(vals, 25)),
                            float(np.median(vals)),
                            float(np.percentile(vals, 75)),
                            float(np.max(vals)),
                        ]
                    rows.append((fname, cname, partition, *stats))
        return rows


def _model_seeds(base_seed: int, m: int) -> tuple[int, int, int]:
    children = np.random.SeedSequence(base_seed, spawn_key=(m,)).spawn(3)
    return tuple(int(c.generate_state(1, np.uint64)[0]) for c in children)


def _median_by_class(values, predicted, tie, labels, K, F):
    out = np.full((K, F), np.nan)
    ok = (predicted == labels) & ~tie
    for c in range(K):
        mask = ok & (labels == c)
        if mask.any():
            out[c] = np.median(values[mask][:, :, c], axis=0)
    return out


def robustness_run(ds: Dataset, config: RobustnessConfig, threads: int = 1) -> RobustnessResult:
    """Train `models` independent forests on fresh splits and collect, per
    model, the test accuracy and the per-class median contributions on both
    partitions (plus the excluded instance's contributions when holdout is
    set). Model m draws all randomness from SeedSequence(seed, spawn_key=(m,)),
    so results do not depend on scheduling.
    """
    if config.models < 2:
        raise DataError("models must be >= 2")
    if not 0.0 < config.train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    if config.holdout is not None and not 0 <= config.holdout < ds.n_instances:
        raise DataError("holdout row out of range")
    pool = np.arange(ds.n_instances, dtype=np.int64)
    if config.holdout is not None:
        pool = pool[pool != config.holdout]
    if pool.size < 2:
        raise DataError("need at least two rows besides the holdout")
    K, F = ds.n_classes, ds.n_features
    n_train = max(1, min(pool.size - 1, int(np.floor(config.train_fraction * pool.size + 0.5))))

    def run_model(m: int):
        split_seed, forest_seed, tie_seed = _model_seeds(config.seed, m)
        perm = np.random.default_rng(split_seed).permutation(pool.size)
        train = np.sort(pool[perm[:n_train]])
        test = np.sort(pool[perm[n_train:]])
        forest = fit(
            ds,
            train,
            ForestParams(config.trees, config.mtry, config.min_node_size, forest_seed),
        )
        out = {}
        for name, rows in (("train", train), ("test", test)):
            Xm = np.ascontiguousarray(ds.X[rows])
            values = _raw_contributions(forest, Xm)
            pred, tie = predict(forest, Xm, tie_seed=tie_seed, row_ids=rows)
            out[name] = _median_by_class(values, pred, tie, ds.labels[rows], K, F)
            if name == "test":
                out["accuracy"] = float(np.mean(pred == ds.labels[rows]))
        if config.holdout is not None:
            out["holdout"] = _raw_contributions(
                forest, ds.X[config.holdout].reshape(1, -1)
            )[0]
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_ex:
            results = list(pool_ex.map(run_model, range(config.models)))
    else:
        results = [run_model(m) for m in range(config.models)]

    accuracies = np.array([r["accuracy"] for r in results])
    train_medians = np.stack([r["train"] for r in results])
    test_medians = np.stack([r["test"] for r in results])
    holdout_contribs = (
        np.stack([r["holdout"] for r in results]) if config.holdout is not None else None
    )
    return RobustnessResult(
        feature_names=ds.feature_names,
        class_names=ds.class_names,
        config=config,
        accuracies=accuracies,
        train_medians=train_medians,
        test_medians=test_medians,
        holdout_contribs=holdout_contribs,
    )
