"""Per-instance feature contributions from local increments along tree paths.

Each split contributes the change in the node class distribution between the
child an instance enters and its parent, attributed to the split feature.
Summing the increments along the instance's path in every tree and averaging
over trees yields the forest-level contribution of each feature toward each
class. When all terminal nodes are unanimous, the tree vote distribution
decomposes exactly as root average + sum of contributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError, ModelConsistencyError
from .forest import Forest, _as_matrix, predict, vote_counts


def _require_stats(forest: Forest) -> None:
    for t, tree in enumerate(forest.trees):
        if np.isnan(tree.y_mean).any():
            raise ModelConsistencyError(
                f"tree {t} lacks node statistics; run annotate_node_distributions first"
            )


def annotate_node_distributions(forest: Forest, ds: Dataset) -> Forest:
    """Recompute every node's class distribution from the tree's bag rows.

    Routes each bag row (with its bootstrap multiplicity) down the tree and
    tallies class frequencies at every node it crosses. Where the forest holds
    statistics they must match exactly (<= 1e-12); missing statistics (nodes
    with null y_mean) are filled in. Returns the same forest object.
    """
    if ds.feature_names != forest.feature_names:
        raise DataError("dataset feature names do not match the model")
    if len(ds.class_names) != forest.n_classes:
        raise DataError("dataset class count does not match the model")
    K = forest.n_classes
    filled = False
    for t, tree in enumerate(forest.trees):
        if tree.bag.max() >= ds.n_instances:
            raise DataError(f"tree {t} bag references a row outside the dataset")
        Xb = ds.X[tree.bag]
        yb = ds.labels[tree.bag]
        counts = np.zeros((tree.n_nodes, K), dtype=np.int64)
        node = np.zeros(len(tree.bag), dtype=np.int64)
        np.add.at(counts, (node, yb), 1)
        while True:
            f = tree.feature[node]
            act = np.nonzero(f >= 0)[0]
            if act.size == 0:
                break
            cur = node[act]
            go_left = Xb[act, f[act]] <= tree.threshold[cur]
            child = np.where(go_left, tree.left[cur], tree.right[cur])
            np.add.at(counts, (child, yb[act]), 1)
            node[act] = child
        n_rec = counts.sum(axis=1)
        if (n_rec < 1).any():
            bad = int(np.nonzero(n_rec < 1)[0][0])
            raise ModelConsistencyError(f"tree {t}: node {bad} is reached by no bag row")
        y_rec = counts.astype(np.float64) / n_rec[:, None]
        if np.isnan(tree.y_mean).any():
            tree.y_mean = y_rec
            tree.n_node = n_rec
            tree.invalidate_cache()
            filled = True
        else:
            if not np.array_equal(n_rec, tree.n_node):
                bad = int(np.nonzero(n_rec != tree.n_node)[0][0])
                raise ModelConsistencyError(
                    f"tree {t}: node {bad} stored n_train {tree.n_node[bad]} "
                    f"but {n_rec[bad]} bag rows reach it"
                )
            err = np.abs(y_rec - tree.y_mean)
            if err.max() > 1e-12:
                bad = int(np.unravel_index(np.argmax(err), err.shape)[0])
                raise ModelConsistencyError(
                    f"tree {t}: node {bad} stored y_mean deviates from the bag "
                    f"frequencies by {err.max():.3e}"
                )
    if filled:
        roots = np.stack([tr.y_mean[0] for tr in forest.trees])
        forest.y_root_avg = roots.sum(axis=0) / forest.n_trees
    return forest


def check_unanimity(forest: Forest) -> bool:
    """True when every terminal node of every tree is single-class."""
    _require_stats(forest)
    for tree in forest.trees:
        leaves = tree.feature < 0
        if not (tree.y_mean[leaves].max(axis=1) == 1.0).all():
            return False
    return True


def _raw_contributions(forest: Forest, Xm: np.ndarray) -> np.ndarray:
    """(n, F, K) contribution tensor: averaged path increments per tree."""
    _require_stats(forest)
    out = np.zeros((Xm.shape[0], forest.n_features, forest.n_classes))
    for tree in forest.trees:
        node = np.zeros(Xm.shape[0], dtype=np.int64)
        while True:
            f = tree.feature[node]
            act = np.nonzero(f >= 0)[0]
            if act.size == 0:
                break
            cur = node[act]
            fa = f[act]
            go_left = Xm[act, fa] <= tree.threshold[cur]
            child = np.where(go_left, tree.left[cur], tree.right[cur])
            np.add.at(out, (act, fa), tree.y_mean[child] - tree.y_mean[cur])
            node[act] = child
    out /= forest.n_trees
    return out


@dataclass(frozen=True)
class ContributionVector:
    """Contributions of one instance; values is (F,) toward target_class,
    or (F, K) toward every class when target_class is None."""

    feature_names: tuple[str, ...]
    values: np.ndarray
    target_class: int | None


def feature_contributions(forest: Forest, x, class_index: int) -> ContributionVector:
    """Per-feature contributions of one instance toward one class."""
    if not 0 <= class_index < forest.n_classes:
        raise DataError(f"class index {class_index} out of range")
    Xm, _ = _as_matrix(forest, x)
    if Xm.shape[0] != 1:
        raise DataError("feature_contributions expects a single instance")
    values = _raw_contributions(forest, Xm)[0, :, class_index]
    return ContributionVector(forest.feature_names, values, class_index)


def feature_contributions_full(forest: Forest, x) -> ContributionVector:
    """(F, K) contributions of one instance toward every class."""
    Xm, _ = _as_matrix(forest, x)
    if Xm.shape[0] != 1:
        raise DataError("feature_contributions_full expects a single instance")
    return ContributionVector(forest.feature_names, _raw_contributions(forest, Xm)[0], None)


@dataclass
class ContributionSet:
    """Batch contributions plus the vote summary for each instance.

    values is (n, F, K); predictions carry the tie flag and the vote fraction
    of the predicted class. target_class is None in predicted-class mode.
    """

    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    row_ids: np.ndarray
    values: np.ndarray
    y_hat: np.ndarray
    predicted: np.ndarray
    tie: np.ndarray
    target_class: int | None

    @property
    def n_instances(self) -> int:
        return len(self.row_ids)

    @property
    def vote_fraction(self) -> np.ndarray:
        return self.y_hat[np.arange(len(self.predicted)), self.predicted]

    def toward(self, class_index: int) -> np.ndarray:
        """(n, F) slice toward one class."""
        return self.values[:, :, class_index]

    def per_instance_target(self) -> np.ndarray:
        """(n, F) toward the fixed target class, or toward each row's
        predicted class when no target is set."""
        if self.target_class is not None:
            return self.values[:, :, self.target_class]
        return self.values[np.arange(len(self.predicted)), :, self.predicted]


def contributions_matrix(
    forest: Forest,
    ds: Dataset,
    rows=None,
    target_class: int | str | None = None,
    tie_seed: int = 7,
) -> ContributionSet:
    """Contributions for the given dataset rows (all rows by default).

    target_class fixes the reported class (name or index); None means each
    row reports toward its own predicted class. Tie resolution streams are
    keyed by dataset row id, so a row's prediction does not depend on which
    batch it appears in.
    """
    if ds.feature_names != forest.feature_names:
        raise DataError("dataset feature names do not match the model")
    if rows is None:
        rows = np.arange(ds.n_instances, dtype=np.int64)
    else:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= ds.n_instances):
            raise DataError("rows out of range")
    if isinstance(target_class, str):
        if target_class not in forest.class_names:
            raise DataError(f"unknown class {target_class!r}")
        target_class = forest.class_names.index(target_class)
    if target_class is not None and not 0 <= target_class < forest.n_classes:
        raise DataError(f"class index {target_class} out of range")
    Xm = np.ascontiguousarray(ds.X[rows])
    values = _raw_contributions(forest, Xm)
    y_hat = vote_counts(forest, Xm) / forest.n_trees
    if rows.size:
        predicted, tie = predict(forest, Xm, tie_seed=tie_seed, row_ids=rows)
    else:
        predicted = np.zeros(0, dtype=np.int64)
        tie = np.zeros(0, dtype=bool)
    return ContributionSet(
        feature_names=forest.feature_names,
        class_names=forest.class_names,
        row_ids=rows,
        values=values,
        y_hat=y_hat,
        predicted=predicted,
        tie=tie,
        target_class=target_class,
    )


def verify_decomposition(forest: Forest, x) -> float:
    """Largest residual |y_hat - (root average + summed contributions)|.

    The residual is (up to float noise) zero exactly when every terminal node
    involved is unanimous; mixed leaves make the vote and the distribution
    average diverge.
    """
    Xm, _ = _as_matrix(forest, x)
    y_hat = vote_counts(forest, Xm) / forest.n_trees
    recon = forest.y_root_avg + _raw_contributions(forest, Xm).sum(axis=1)
    return float(np.abs(y_hat - recon).max())
