"""Shared oracles and generators for the test suite.

The contribution oracle walks each tree path one instance at a time, which is
deliberately independent of the vectorized implementation. The k-means oracle
enumerates every 2-partition. Golden values for the ten-row fixture were
worked out by hand from the two fixture trees.
"""

from __future__ import annotations

import contextlib
import io
import itertools

import numpy as np

import rfcontrib as rc
from rfcontrib import cli
from rfcontrib.data import Dataset
from rfcontrib.forest import Forest, Tree

# Contributions toward class 1 for the ten fixture rows, and the forest's
# class-1 vote fractions. Rows 7 and 9 (0-based) split the two trees' votes.
TABLE2 = np.array(
    [
        [0.0, 0.125, -0.625, 0.0],
        [0.0, -0.125, -0.375, 0.0],
        [0.0, 0.125, -0.625, 0.0],
        [0.0, -0.125, -0.375, 0.0],
        [0.0, -0.125, -0.375, 0.0],
        [0.0, 0.0, 0.5, 0.0],
        [0.0, 0.0, 0.5, 0.0],
        [0.0, 0.125, -0.125, 0.0],
        [0.0, 0.0, 0.5, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
)
TABLE2_Y_HAT1 = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.5, 1.0, 0.5])
TABLE2_TIED_ROWS = (7, 9)
TABLE2_ROOT_AVG = np.array([0.5, 0.5])


def run_cli(args: list[str]):
    """Invoke the CLI in-process; returns (exit_code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(args)
    return code, out.getvalue(), err.getvalue()


def pathwalk_contributions(forest: Forest, x) -> np.ndarray:
    """(F, K) contribution matrix by walking every tree path for one instance."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((forest.n_features, forest.n_classes))
    for tree in forest.trees:
        node = 0
        while tree.feature[node] >= 0:
            f = int(tree.feature[node])
            if x[f] <= tree.threshold[node]:
                child = int(tree.left[node])
            else:
                child = int(tree.right[node])
            out[f] += tree.y_mean[child] - tree.y_mean[node]
            node = child
    return out / forest.n_trees


def pathwalk_sum_per_tree(tree: Tree, x) -> np.ndarray:
    """Summed increments along one tree's path (K,), for the telescoping check."""
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros(tree.y_mean.shape[1])
    node = 0
    while tree.feature[node] >= 0:
        f = int(tree.feature[node])
        child = int(tree.left[node]) if x[f] <= tree.threshold[node] else int(tree.right[node])
        total += tree.y_mean[child] - tree.y_mean[node]
        node = child
    return total


def tree_leaf(tree: Tree, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    node = 0
    while tree.feature[node] >= 0:
        f = int(tree.feature[node])
        node = int(tree.left[node]) if x[f] <= tree.threshold[node] else int(tree.right[node])
    return node


def tree_depth(tree: Tree) -> int:
    """Edges on the longest root-to-leaf path."""
    depth = np.zeros(tree.n_nodes, dtype=np.int64)
    for node in range(tree.n_nodes):
        if tree.feature[node] >= 0:
            for child in (int(tree.left[node]), int(tree.right[node])):
                depth[child] = depth[node] + 1
    return int(depth.max())


def forest_depth(forest: Forest) -> int:
    return max(tree_depth(t) for t in forest.trees)


def random_dataset(
    rng: np.random.Generator,
    n_max: int = 50,
    f_max: int = 8,
    k_max: int = 3,
    value_alphabet: int | None = None,
) -> Dataset:
    """Random labeled dataset; a small value alphabet forces shallow trees."""
    n = int(rng.integers(4, n_max + 1))
    n_feat = int(rng.integers(2, f_max + 1))
    k = int(rng.integers(2, k_max + 1))
    n = max(n, k)
    if value_alphabet is None:
        X = rng.normal(size=(n, n_feat))
    else:
        pool = rng.normal(size=value_alphabet)
        X = rng.choice(pool, size=(n, n_feat))
    labels = rng.integers(0, k, size=n)
    labels[:k] = np.arange(k)
    names = tuple(f"f{i + 1}" for i in range(n_feat))
    classes = tuple(f"c{i}" for i in range(k))
    return Dataset(names, X, labels.astype(np.int64), classes)


def conflict_free_dataset(rng: np.random.Generator, n_max: int = 60, f_max: int = 10) -> Dataset:
    """Continuous features make duplicate rows (and label conflicts) impossible."""
    ds = random_dataset(rng, n_max=n_max, f_max=f_max, k_max=3, value_alphabet=None)
    assert len({tuple(row) for row in ds.X.tolist()}) == ds.n_instances
    return ds


def random_forest(rng: np.random.Generator, ds: Dataset, t_max: int = 10, pure: bool = False):
    trees = int(rng.integers(1, t_max + 1))
    min_node = 1 if pure else int(rng.integers(1, 4))
    mtry = int(rng.integers(1, ds.n_features + 1))
    params = rc.ForestParams(
        trees=trees, mtry=mtry, min_node_size=min_node, seed=int(rng.integers(1 << 31))
    )
    return rc.fit(ds, np.arange(ds.n_instances), params)


def exhaustive_two_partition_wcss(points: np.ndarray) -> float:
    """Minimum WCSS over every split of the points into two non-empty groups."""
    n = len(points)
    best = None
    for r in range(1, n // 2 + 1):
        for combo in itertools.combinations(range(n), r):
            mask = np.zeros(n, dtype=bool)
            mask[list(combo)] = True
            w = 0.0
            for part in (points[mask], points[~mask]):
                center = part.mean(axis=0)
                w += float(np.sum((part - center) ** 2))
            if best is None or w < best:
                best = w
    return best
