"""Random forest of unpruned CART trees with per-node class distributions.

Trees grow to purity by default, splits minimize Gini impurity with midpoint
thresholds, and every node keeps the class frequency vector of the bootstrap
rows that reach it. All randomness flows through per-tree child streams of a
single seed, so a fit is reproducible bit-for-bit regardless of thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .data import Dataset
from .errors import DataError, ModelConsistencyError, SchemaError

SCHEMA_VERSION = 1

# Exact integer gain arithmetic stays within int64 up to this window size;
# larger windows fall back to float comparison.
_EXACT_GAIN_LIMIT = 40000


def gini_impurity(dist) -> float:
    """Gini impurity 1 - sum(p^2) of a count or frequency vector."""
    d = np.asarray(dist, dtype=np.float64)
    total = d.sum()
    if d.ndim != 1 or total <= 0 or (d < 0).any():
        raise DataError("distribution must be a non-negative vector with positive sum")
    p = d / total
    return float(1.0 - np.dot(p, p))


@nb.njit(cache=True, nogil=True)
def _split_search(Xb, yb, order, lo, hi, cand, K, pc, psumsq):
    """Best Gini split over the window order[lo:hi] among candidate features.

    Candidates must be sorted ascending; maximizing the score with strict
    comparison then realizes the (lowest feature, lowest threshold) tie-break.
    Returns (feature, threshold, sumsq_left, sumsq_right, n_left, found).
    """
    m = hi - lo
    vals = np.empty(m, np.float64)
    cntL = np.empty(K, np.int64)
    cntR = np.empty(K, np.int64)
    best_feat = -1
    best_thr = 0.0
    best_score = -1.0
    best_sl = 0
    best_sr = 0
    best_nl = 0
    for ci in range(cand.shape[0]):
        f = cand[ci]
        for i in range(m):
            vals[i] = Xb[order[lo + i], f]
        srt = np.argsort(vals)
        for k in range(K):
            cntL[k] = 0
            cntR[k] = pc[k]
        sl = 0
        sr = psumsq
        for i in range(m - 1):
            cls = yb[order[lo + srt[i]]]
            sl += 2 * cntL[cls] + 1
            cntL[cls] += 1
            sr -= 2 * cntR[cls] - 1
            cntR[cls] -= 1
            vh = vals[srt[i]]
            vn = vals[srt[i + 1]]
            if vh != vn:
                nl = i + 1
                nr = m - nl
                score = sl / nl + sr / nr
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_thr = 0.5 * (vh + vn)
                    best_sl = sl
                    best_sr = sr
                    best_nl = nl
    return best_feat, best_thr, best_sl, best_sr, best_nl, best_feat >= 0


@nb.njit(cache=True, nogil=True)
def _gain_positive(sl, sr, nl, nr, m, psumsq):
    """Whether the split improves weighted Gini; exact integers when safe."""
    if m <= _EXACT_GAIN_LIMIT:
        return sl * nr * m + sr * nl * m > psumsq * nl * nr
    return sl / nl + sr / nr > psumsq / m


@nb.njit(cache=True, nogil=True)
def _grow_tree(Xb, yb, K, mtry, min_node_size, U):
    """Grow one CART tree on the bootstrap sample (Xb, yb).

    U is a pre-drawn (2n+1, mtry) uniform matrix; each split attempt consumes
    one row for the without-replacement feature draw, making growth a pure
    function of its arguments.
    """
    n, F = Xb.shape
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    counts = np.zeros((max_nodes, K), np.int64)
    n_node = np.zeros(max_nodes, np.int64)
    order = np.arange(n)
    buf = np.empty(n, np.int64)
    feats = np.empty(F, np.int64)
    cand = np.empty(mtry, np.int64)
    pc = np.empty(K, np.int64)
    stack_node = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1
    attempt = 0
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        n_node[node] = m
        for k in range(K):
            pc[k] = 0
        for i in range(lo, hi):
            pc[yb[order[i]]] += 1
        cmax = 0
        psumsq = 0
        for k in range(K):
            counts[node, k] = pc[k]
            psumsq += pc[k] * pc[k]
            if pc[k] > cmax:
                cmax = pc[k]
        if cmax == m or m < min_node_size:
            continue
        for j in range(F):
            feats[j] = j
        for j in range(mtry):
            r = j + int(U[attempt, j] * (F - j))
            t = feats[j]
            feats[j] = feats[r]
            feats[r] = t
            cand[j] = feats[j]
        attempt += 1
        for a in range(1, mtry):
            key = cand[a]
            b = a - 1
            while b >= 0 and cand[b] > key:
                cand[b + 1] = cand[b]
                b -= 1
            cand[b + 1] = key
        bf, bt, sl, sr, nl, found = _split_search(
            Xb, yb, order, lo, hi, cand, K, pc, psumsq
        )
        if not found or not _gain_positive(sl, sr, nl, m - nl, m, psumsq):
            continue
        # stable two-pass partition keeps within-side row order deterministic
        p = lo
        for i in range(lo, hi):
            if Xb[order[i], bf] <= bt:
                buf[p] = order[i]
                p += 1
        q = p
        for i in range(lo, hi):
            if Xb[order[i], bf] > bt:
                buf[q] = order[i]
                q += 1
        for i in range(lo, hi):
            order[i] = buf[i]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = bf
        threshold[node] = bt
        left[node] = lid
        right[node] = rid
        stack_node[top] = rid
        stack_lo[top] = p
        stack_hi[top] = hi
        top += 1
        stack_node[top] = lid
        stack_lo[top] = lo
        stack_hi[top] = p
        top += 1
    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        counts[:n_nodes],
        n_node[:n_nodes],
    )


@dataclass(frozen=True)
class ForestParams:
    """Hyperparameters; mtry=None means floor(sqrt(n_features))."""

    trees: int
    mtry: int | None = None
    min_node_size: int = 1
    seed: int = 7

    def resolve_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            return max(1, int(np.floor(np.sqrt(n_features))))
        return self.mtry


@dataclass
class Tree:
    """Struct-of-arrays CART tree; node ids are array positions, root is 0."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    y_mean: np.ndarray
    n_node: np.ndarray
    bag: np.ndarray
    oob: np.ndarray
    _majority: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def majority(self) -> np.ndarray:
        """Per-node majority class (lowest index on ties)."""
        if self._majority is None:
            self._majority = np.argmax(self.y_mean, axis=1).astype(np.int64)
        return self._majority

    def invalidate_cache(self) -> None:
        self._majority = None


@dataclass
class Forest:
    trees: list[Tree]
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    params: ForestParams
    train_indices: np.ndarray
    y_root_avg: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _root_average(trees: list[Tree]) -> np.ndarray:
    roots = np.stack([t.y_mean[0] for t in trees])
    return roots.sum(axis=0) / len(trees)


def _tree_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def fit(
    ds: Dataset,
    train_indices,
    params: ForestParams,
    bags=None,
    threads: int = 1,
) -> Forest:
    """Train a forest on the given dataset rows.

    ``bags`` optionally overrides the bootstrap draw with explicit dataset-row
    multisets (one array per tree, rows must belong to train_indices). Tree t
    always derives its randomness from SeedSequence(seed, spawn_key=(t,)).
    """
    train = np.unique(np.asarray(train_indices, dtype=np.int64))
    if train.size != np.asarray(train_indices).size:
        raise DataError("train_indices contains duplicates")
    if train.size == 0:
        raise DataError("train_indices is empty")
    if train[0] < 0 or train[-1] >= ds.n_instances:
        raise DataError("train_indices out of range")
    if params.trees < 1:
        raise DataError("need at least one tree")
    if params.min_node_size < 1:
        raise DataError("min_node_size must be >= 1")
    mtry = params.resolve_mtry(ds.n_features)
    if not 1 <= mtry <= ds.n_features:
        raise DataError(f"mtry must lie in [1, {ds.n_features}]")
    if bags is not None and len(bags) != params.trees:
        raise DataError("bags override must supply one bag per tree")

    Xtr = np.ascontiguousarray(ds.X[train])
    ytr = np.ascontiguousarray(ds.labels[train])
    K = ds.n_classes
    n_train = train.size

    def build(t: int) -> Tree:
        g = _tree_stream(params.seed, t)
        if bags is None:
            bag_local = np.sort(g.integers(0, n_train, size=n_train))
        else:
            bag_ds = np.sort(np.asarray(bags[t], dtype=np.int64))
            if bag_ds.size == 0:
                raise DataError(f"bag {t} is empty")
            pos = np.searchsorted(train, bag_ds)
            if (pos >= n_train).any() or (train[np.minimum(pos, n_train - 1)] != bag_ds).any():
                raise DataError(f"bag {t} contains rows outside train_indices")
            bag_local = pos
        U = g.random((2 * bag_local.size + 1, mtry))
        feat, thr, left, right, counts, n_node = _grow_tree(
            Xtr[bag_local], ytr[bag_local], K, mtry, params.min_node_size, U
        )
        y_mean = counts.astype(np.float64) / n_node[:, None]
        bag = train[bag_local]
        oob = np.setdiff1d(train, bag)
        return Tree(feat, thr, left, right, y_mean, n_node, bag, oob)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(params.trees)))
    else:
        trees = [build(t) for t in range(params.trees)]

    return Forest(
        trees=trees,
        feature_names=ds.feature_names,
        class_names=ds.class_names,
        params=ForestParams(params.trees, mtry, params.min_node_size, params.seed),
        train_indices=train,
        y_root_avg=_root_average(trees),
    )


def best_split(ds: Dataset, rows, candidate_features=None):
    """Best (feature, threshold, gain) over the rows, or None.

    Equal-gain candidates resolve to the lowest feature index, then the lowest
    threshold. gain is the decrease in weighted Gini impurity; only strictly
    positive gains yield a split.
    """
    rows = np.sort(np.asarray(rows, dtype=np.int64))
    if rows.size == 0:
        raise DataError("rows is empty")
    if rows[0] < 0 or rows[-1] >= ds.n_instances:
        raise DataError("rows out of range")
    if candidate_features is None:
        cand = np.arange(ds.n_features, dtype=np.int64)
    else:
        cand = np.unique(np.asarray(candidate_features, dtype=np.int64))
        if cand.size == 0 or cand[0] < 0 or cand[-1] >= ds.n_features:
            raise DataError("candidate features out of range")
    Xb = np.ascontiguousarray(ds.X[rows])
    yb = np.ascontiguousarray(ds.labels[rows])
    m = rows.size
    order = np.arange(m)
    pc = np.bincount(yb, minlength=ds.n_classes).astype(np.int64)
    psumsq = int(np.dot(pc, pc))
    f, thr, sl, sr, nl, found = _split_search(
        Xb, yb, order, 0, m, cand, ds.n_classes, pc, psumsq
    )
    if not found or not _gain_positive(sl, sr, nl, m - nl, m, psumsq):
        return None
    score = sl / nl + sr / (m - nl)
    gain = (score - psumsq / m) / m
    return int(f), float(thr), float(gain)


def leaf_indices(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Terminal node id reached by each row of X."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    feature = tree.feature
    while True:
        f = feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            return node
        cur = node[active]
        go_left = X[active, f[active]] <= tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])


def _as_matrix(forest: Forest, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DataError(
            f"expected {forest.n_features} feature columns, got shape {X.shape}"
        )
    return np.ascontiguousarray(X), single


def vote_counts(forest: Forest, X) -> np.ndarray:
    """Integer per-class tree votes, shape (n, K)."""
    Xm, _ = _as_matrix(forest, X)
    votes = np.zeros((Xm.shape[0], forest.n_classes), dtype=np.int64)
    rows = np.arange(Xm.shape[0])
    for tree in forest.trees:
        leaves = leaf_indices(tree, Xm)
        votes[rows, tree.majority[leaves]] += 1
    return votes


def predict_proba(forest: Forest, X) -> np.ndarray:
    """Fraction of trees voting each class (Y-hat); rows sum to 1."""
    Xm, single = _as_matrix(forest, X)
    proba = vote_counts(forest, Xm) / forest.n_trees
    return proba[0] if single else proba


def predict(forest: Forest, X, tie_seed: int = 7, row_ids=None):
    """Majority-vote class per row plus a flag marking tied votes.

    Ties resolve uniformly at random from SeedSequence(tie_seed, spawn_key=
    (row_id,)); row_ids defaults to batch positions.
    """
    Xm, single = _as_matrix(forest, X)
    votes = vote_counts(forest, Xm)
    pred = np.argmax(votes, axis=1).astype(np.int64)
    top = votes[np.arange(len(votes)), pred]
    tie = (votes == top[:, None]).sum(axis=1) > 1
    if row_ids is None:
        row_ids = np.arange(len(votes))
    else:
        row_ids = np.asarray(row_ids, dtype=np.int64)
    for i in np.nonzero(tie)[0]:
        winners = np.nonzero(votes[i] == top[i])[0]
        g = np.random.default_rng(np.random.SeedSequence(tie_seed, spawn_key=(int(row_ids[i]),)))
        pred[i] = int(g.choice(winners))
    if single:
        return int(pred[0]), bool(tie[0])
    return pred, tie


def _bag_counts(bag: np.ndarray) -> list[list[int]]:
    rows, counts = np.unique(bag, return_counts=True)
    return [[int(r), int(c)] for r, c in zip(rows, counts)]


def _bag_from_counts(pairs, label: str) -> np.ndarray:
    rows = []
    for pair in pairs:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise SchemaError(f"{label}: bag_counts entries must be [row, count] pairs")
        r, c = pair
        if not (isinstance(r, int) and isinstance(c, int)) or r < 0 or c < 1:
            raise SchemaError(f"{label}: bad bag_counts pair {pair!r}")
        rows.extend([r] * c)
    if not rows:
        raise SchemaError(f"{label}: empty bag")
    return np.asarray(rows, dtype=np.int64)


def save(forest: Forest, path, provenance: dict | None = None) -> None:
    """Serialize to the versioned JSON model format (byte-stable)."""
    doc: dict = {"schema_version": SCHEMA_VERSION}
    if provenance is not None:
        doc["provenance"] = provenance
    doc["class_names"] = list(forest.class_names)
    doc["feature_names"] = list(forest.feature_names)
    doc["hyperparams"] = {
        "trees": forest.params.trees,
        "mtry": forest.params.mtry,
        "min_node_size": forest.params.min_node_size,
        "seed": forest.params.seed,
    }
    doc["train_indices"] = [int(i) for i in forest.train_indices]
    doc["y_root_avg"] = [float(v) for v in forest.y_root_avg]
    trees_doc = []
    for tree in forest.trees:
        nodes = []
        for i in range(tree.n_nodes):
            internal = tree.feature[i] >= 0
            nodes.append(
                {
                    "id": i,
                    "kind": "internal" if internal else "terminal",
                    "split_feature": int(tree.feature[i]) if internal else None,
                    "split_value": float(tree.threshold[i]) if internal else None,
                    "left": int(tree.left[i]) if internal else None,
                    "right": int(tree.right[i]) if internal else None,
                    "y_mean": [float(v) for v in tree.y_mean[i]],
                    "n_train": int(tree.n_node[i]),
                }
            )
        trees_doc.append({"bag_counts": _bag_counts(tree.bag), "nodes": nodes})
    doc["trees"] = trees_doc
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def _require(doc: dict, key: str, label: str):
    if key not in doc:
        raise SchemaError(f"{label}: missing key {key!r}")
    return doc[key]


def validate_forest(forest: Forest) -> None:
    """Check structural and statistical invariants; raise on violation."""
    K = forest.n_classes
    for t, tree in enumerate(forest.trees):
        label = f"tree {t}"
        n = tree.n_nodes
        if n == 0:
            raise ModelConsistencyError(f"{label}: no nodes")
        referenced = np.zeros(n, dtype=bool)
        for i in range(n):
            internal = tree.feature[i] >= 0
            if internal:
                l, r = int(tree.left[i]), int(tree.right[i])
                for child in (l, r):
                    if not 0 < child < n:
                        raise ModelConsistencyError(f"{label}: node {i} child {child} out of range")
                    if referenced[child]:
                        raise ModelConsistencyError(f"{label}: node {child} has two parents")
                    referenced[child] = True
                if tree.feature[i] >= len(forest.feature_names):
                    raise ModelConsistencyError(f"{label}: node {i} splits on unknown feature")
            else:
                if tree.left[i] >= 0 or tree.right[i] >= 0:
                    raise ModelConsistencyError(f"{label}: terminal node {i} has children")
        if referenced[0]:
            raise ModelConsistencyError(f"{label}: root is referenced as a child")
        if n > 1 and not referenced[1:].all():
            raise ModelConsistencyError(f"{label}: unreachable node")
        if np.isnan(tree.y_mean).any():
            continue  # statistics absent; annotate_node_distributions fills them
        for i in range(n):
            ym = tree.y_mean[i]
            if ym.shape != (K,):
                raise ModelConsistencyError(f"{label}: node {i} y_mean has wrong length")
            if (ym < -1e-12).any() or abs(ym.sum() - 1.0) > 1e-12:
                raise ModelConsistencyError(f"{label}: node {i} y_mean is not a distribution")
            if tree.n_node[i] < 1:
                raise ModelConsistencyError(f"{label}: node {i} has n_train < 1")
            if tree.feature[i] >= 0:
                l, r = int(tree.left[i]), int(tree.right[i])
                if tree.n_node[i] != tree.n_node[l] + tree.n_node[r]:
                    raise ModelConsistencyError(f"{label}: node {i} child sizes do not add up")
                mix = (
                    tree.n_node[l] * tree.y_mean[l] + tree.n_node[r] * tree.y_mean[r]
                ) / tree.n_node[i]
                if np.abs(mix - ym).max() > 1e-12:
                    raise ModelConsistencyError(
                        f"{label}: node {i} y_mean is not the weighted child average"
                    )
    stats_ok = all(not np.isnan(t.y_mean).any() for t in forest.trees)
    if stats_ok:
        if np.abs(_root_average(forest.trees) - forest.y_root_avg).max() > 1e-12:
            raise ModelConsistencyError("y_root_avg does not match the tree roots")


def load(path) -> Forest:
    """Read and validate a model file written by save()."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: model document must be an object")
    version = _require(doc, "schema_version", str(path))
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema_version {version!r}")
    class_names = tuple(_require(doc, "class_names", str(path)))
    feature_names = tuple(_require(doc, "feature_names", str(path)))
    hp = _require(doc, "hyperparams", str(path))
    params = ForestParams(
        trees=int(_require(hp, "trees", "hyperparams")),
        mtry=int(_require(hp, "mtry", "hyperparams")),
        min_node_size=int(_require(hp, "min_node_size", "hyperparams")),
        seed=int(_require(hp, "seed", "hyperparams")),
    )
    train = np.asarray(_require(doc, "train_indices", str(path)), dtype=np.int64)
    y_root_avg = np.asarray(_require(doc, "y_root_avg", str(path)), dtype=np.float64)
    trees_doc = _require(doc, "trees", str(path))
    if len(trees_doc) != params.trees:
        raise SchemaError(f"{path}: hyperparams.trees does not match the tree list")
    K = len(class_names)
    trees = []
    for t, tdoc in enumerate(trees_doc):
        label = f"{path}: tree {t}"
        nodes = _require(tdoc, "nodes", label)
        if not nodes:
            raise SchemaError(f"{label}: empty node list")
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n, dtype=np.float64)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        y_mean = np.full((n, K), np.nan, dtype=np.float64)
        n_node = np.zeros(n, dtype=np.int64)
        for i, ndoc in enumerate(nodes):
            if _require(ndoc, "id", label) != i:
                raise SchemaError(f"{label}: node ids must equal array positions")
            kind = _require(ndoc, "kind", label)
            if kind == "internal":
                feature[i] = int(_require(ndoc, "split_feature", label))
                threshold[i] = float(_require(ndoc, "split_value", label))
                left[i] = int(_require(ndoc, "left", label))
                right[i] = int(_require(ndoc, "right", label))
            elif kind != "terminal":
                raise SchemaError(f"{label}: node {i} has unknown kind {kind!r}")
            ym = _require(ndoc, "y_mean", label)
            if ym is not None:
                if len(ym) != K:
                    raise SchemaError(f"{label}: node {i} y_mean has wrong length")
                y_mean[i] = np.asarray(ym, dtype=np.float64)
            n_node[i] = int(_require(ndoc, "n_train", label))
        bag = _bag_from_counts(_require(tdoc, "bag_counts", label), label)
        oob = np.setdiff1d(train, bag)
        trees.append(Tree(feature, threshold, left, right, y_mean, n_node, bag, oob))
    forest = Forest(
        trees=trees,
        feature_names=feature_names,
        class_names=class_names,
        params=params,
        train_indices=train,
        y_root_avg=y_root_avg,
    )
    validate_forest(forest)
    return forest


def _hand_built_tree(bag_rows, nodes, ds: Dataset, train: np.ndarray) -> Tree:
    """Assemble a Tree from (feature, threshold, left, right, counts) tuples."""
    n = len(nodes)
    K = ds.n_classes
    feature = np.full(n, -1, dtype=np.int64)
    threshold = np.zeros(n, dtype=np.float64)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    counts = np.zeros((n, K), dtype=np.int64)
    for i, (f, thr, l, r, cnt) in enumerate(nodes):
        if f is not None:
            feature[i] = f
            threshold[i] = thr
            left[i] = l
            right[i] = r
        counts[i] = cnt
    n_node = counts.sum(axis=1)
    y_mean = counts.astype(np.float64) / n_node[:, None]
    bag = np.sort(np.asarray(bag_rows, dtype=np.int64))
    return Tree(feature, threshold, left, right, y_mean, n_node, bag, np.setdiff1d(train, bag))


def fixture_iris_toy_forest() -> Forest:
    """The worked two-tree forest over the ten-instance Iris subset.

    Tree 0 splits petal length once; tree 1 refines its left side twice. Node
    statistics are the exact bag class frequencies, so annotation and the
    decomposition identity hold exactly.
    """
    from .data import fixture_iris_toy

    ds = fixture_iris_toy()
    train = np.arange(ds.n_instances, dtype=np.int64)
    tree0 = _hand_built_tree(
        bag_rows=[0, 1, 3, 4, 5, 6, 8],
        nodes=[
            (2, 5.2, 1, 2, (4, 3)),
            (None, None, None, None, (4, 0)),
            (None, None, None, None, (0, 3)),
        ],
        ds=ds,
        train=train,
    )
    tree1 = _hand_built_tree(
        bag_rows=[0, 1, 4, 5, 6, 7, 9],
        nodes=[
            (2, 5.05, 1, 2, (3, 4)),
            (1, 2.8, 3, 4, (3, 1)),
            (None, None, None, None, (0, 3)),
            (None, None, None, None, (2, 0)),
            (2, 4.65, 5, 6, (1, 1)),
            (None, None, None, None, (1, 0)),
            (None, None, None, None, (0, 1)),
        ],
        ds=ds,
        train=train,
    )
    trees = [tree0, tree1]
    return Forest(
        trees=trees,
        feature_names=ds.feature_names,
        class_names=ds.class_names,
        params=ForestParams(trees=2, mtry=4, min_node_size=1, seed=7),
        train_indices=train,
        y_root_avg=_root_average(trees),
    )
