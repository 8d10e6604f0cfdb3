"""Contribution-pattern analysis: class medians, k-means cores, reliability.

Patterns are learned from the contributions of correctly classified instances
(prediction matches the label and the vote was not tied), each toward its own
class. Clusters whose size and average vote fraction clear the configured
bars are "core" patterns; new predictions are trusted when they vote strongly
and land inside a core cluster's typical radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .contrib import ContributionSet, feature_contributions_full
from .errors import DataError, PatternError, SchemaError
from .forest import Forest, predict, predict_proba

VARIANCE_FLOOR = 1e-9
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PatternThresholds:
    vote_trust: float = 0.8
    core_min_size_frac: float = 0.1
    core_min_vote: float = 0.9
    dist_quantile: float = 0.95


@dataclass(frozen=True)
class MedianPattern:
    class_index: int
    support: int
    median: np.ndarray


def correct_mask(labels, predicted, tie) -> np.ndarray:
    """Rows counted as correctly classified: right vote and no tie."""
    labels = np.asarray(labels)
    return (labels == np.asarray(predicted)) & ~np.asarray(tie, dtype=bool)


def class_medians(cset: ContributionSet, labels) -> list[MedianPattern | None]:
    """Per-class median contribution (toward the class itself) over its
    correctly classified rows; None where a class has no such rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (cset.n_instances,):
        raise DataError("labels must align with the contribution set")
    ok = correct_mask(labels, cset.predicted, cset.tie)
    out: list[MedianPattern | None] = []
    for c in range(len(cset.class_names)):
        mask = ok & (labels == c)
        if not mask.any():
            out.append(None)
            continue
        med = np.median(cset.values[mask][:, :, c], axis=0)
        out.append(MedianPattern(c, int(mask.sum()), med))
    return out


def _kmeans_once(points: np.ndarray, k: int, rng: np.random.Generator,
                 max_iter: int, tol: float):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))

    def assign(cs):
        dist2 = np.sum((points[:, None, :] - cs[None, :, :]) ** 2, axis=2)
        a = np.argmin(dist2, axis=1)
        md = dist2[np.arange(n), a]
        # Repair empty clusters from the farthest point, lowest id first.
        # Donors stay pinned to the cluster they seeded: with duplicate
        # points argmin ties would otherwise hand them straight back to a
        # lower-index center and the loop would never terminate.
        pinned: dict[int, int] = {}
        while True:
            sizes = np.bincount(a, minlength=k)
            empty = np.nonzero(sizes == 0)[0]
            if empty.size == 0:
                return a, md
            j = int(empty[0])
            sel = md.copy()
            if pinned:
                sel[list(pinned)] = -np.inf
            far = int(np.argmax(sel))
            pinned[far] = j
            cs[j] = points[far]
            dist2[:, j] = np.sum((points - cs[j]) ** 2, axis=1)
            a = np.argmin(dist2, axis=1)
            for p_row, p_cluster in pinned.items():
                a[p_row] = p_cluster
            md = dist2[np.arange(n), a]

    for _ in range(max_iter):
        a, _ = assign(centers)
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = points[a == j].mean(axis=0)
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift < tol:
            break
    a, md = assign(centers)
    return a, centers, float(md.sum())


_EXACT_PAIR_LIMIT = 12


def _kmeans_exact_pair(points: np.ndarray):
    """Optimal 2-partition by enumeration; point 0 anchors cluster 0."""
    n = points.shape[0]
    best = None
    for mask in range(1, 1 << (n - 1)):
        members = np.array(
            [False] + [bool((mask >> (i - 1)) & 1) for i in range(1, n)], dtype=bool
        )
        w = 0.0
        for part in (points[~members], points[members]):
            c = part.mean(axis=0)
            w += float(np.sum((part - c) ** 2))
        if best is None or w < best[1]:
            best = (members, w)
    members, w = best
    a = members.astype(np.int64)
    centers = np.vstack([points[~members].mean(axis=0), points[members].mean(axis=0)])
    return a, centers, w


def kmeans(points, k: int, seed: int, restarts: int = 10,
           max_iter: int = 300, tol: float = 1e-9):
    """Lloyd's algorithm with D^2-weighted seeding and seeded restarts.

    Returns (assignments, centers, wcss) of the restart with the lowest
    within-cluster sum of squares; ties keep the earliest restart. Two-way
    splits of very small point sets skip Lloyd and return the exact optimum
    by partition enumeration, which seeded restarts cannot guarantee.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise PatternError("points must be a non-empty 2-d array")
    if k == 2 and points.shape[0] <= _EXACT_PAIR_LIMIT and points.shape[0] >= 2:
        return _kmeans_exact_pair(points)
    if not 1 <= k <= points.shape[0]:
        raise PatternError(f"k must lie in [1, {points.shape[0]}]")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        a, c, w = _kmeans_once(points, k, rng, max_iter, tol)
        if best is None or w < best[2]:
            best = (a, c, w)
    return best


def _bic(points: np.ndarray, assignments: np.ndarray, k: int, wcss: float) -> float:
    """BIC of a spherical Gaussian mixture with hard assignments."""
    n, d = points.shape
    sigma2 = max(wcss / (d * max(n - k, 1)), VARIANCE_FLOOR)
    sizes = np.bincount(assignments, minlength=k)
    nz = sizes[sizes > 0]
    log_l = (
        float(np.sum(nz * np.log(nz / n)))
        - 0.5 * n * d * math.log(2.0 * math.pi * sigma2)
        - 0.5 * d * (n - k)
    )
    p = k * d + (k - 1) + 1
    return p * math.log(n) - 2.0 * log_l


def _knee_k(bics: list[float]) -> int:
    """Elbow of a BIC curve: the sharpest-curvature k at or below the argmin.

    The argmin acts as an upper bound; among k in [2, argmin] whose discrete
    second difference is computable, the largest curvature wins (ties to the
    smaller k). An argmin of 1 or 2 is returned directly.
    """
    cap = min(range(len(bics)), key=lambda i: (bics[i], i)) + 1
    if cap <= 2:
        return cap
    best_k = None
    best_c = -math.inf
    for k in range(2, cap + 1):
        if k >= len(bics):
            break
        c = bics[k] - 2.0 * bics[k - 1] + bics[k - 2]
        if c > best_c:
            best_k, best_c = k, c
    return cap if best_k is None else best_k


def kmeans_diagnostics(points, k_max: int, seed: int) -> list[dict]:
    """(k, wcss, bic) table for k = 1..min(k_max, n).

    Each row also flags the BIC-minimizing k ("cap") and the curve's elbow
    ("knee"), the count the pattern build uses when only a maximum is given.
    """
    points = np.asarray(points, dtype=np.float64)
    if k_max < 1:
        raise PatternError("k_max must be >= 1")
    rows = []
    for k in range(1, min(k_max, points.shape[0]) + 1):
        a, _, w = kmeans(points, k, seed)
        rows.append({"k": k, "wcss": w, "bic": _bic(points, a, k, w)})
    bics = [r["bic"] for r in rows]
    cap = min(range(len(bics)), key=lambda i: (bics[i], i)) + 1
    knee = _knee_k(bics)
    for r in rows:
        r["cap"] = r["k"] == cap
        r["knee"] = r["k"] == knee
    return rows


def choose_k(points, k_max: int, seed: int) -> int:
    """k in [1, k_max] minimizing the spherical-mixture BIC (ties: smaller k)."""
    rows = kmeans_diagnostics(points, k_max, seed)
    best = min(rows, key=lambda r: (r["bic"], r["k"]))
    return int(best["k"])


@dataclass(frozen=True)
class ClusterStats:
    center: np.ndarray
    variance: np.ndarray
    size: int
    avg_distance: float
    dist_p95: float
    avg_vote_fraction: float
    core: bool
    variance_floored: bool


@dataclass(frozen=True)
class ClusterModel:
    class_index: int
    k: int
    support: int
    clusters: tuple[ClusterStats, ...]


def build_cluster_model(points, vote_fractions, class_index: int, k: int,
                        seed: int, thresholds: PatternThresholds) -> ClusterModel:
    """Cluster one class's contribution vectors and flag its core patterns.

    Clusters are reported largest first (center lexicographic on ties). A
    cluster is core when it holds at least core_min_size_frac of the class
    support and its members' mean vote fraction reaches core_min_vote.
    """
    points = np.asarray(points, dtype=np.float64)
    votes = np.asarray(vote_fractions, dtype=np.float64)
    if votes.shape != (points.shape[0],):
        raise PatternError("vote_fractions must align with points")
    n = points.shape[0]
    k = min(k, n)
    assignments, centers, _ = kmeans(points, k, seed)
    order = sorted(
        range(k),
        key=lambda j: (-int(np.sum(assignments == j)), tuple(centers[j])),
    )
    clusters = []
    for j in order:
        members = assignments == j
        size = int(members.sum())
        center = centers[j]
        if size >= 2:
            raw_var = np.var(points[members], axis=0, ddof=1)
        else:
            raw_var = np.zeros(points.shape[1])
        floored = bool((raw_var < VARIANCE_FLOOR).any())
        variance = np.maximum(raw_var, VARIANCE_FLOOR)
        dists = np.sqrt(np.sum((points[members] - center) ** 2, axis=1))
        clusters.append(
            ClusterStats(
                center=center,
                variance=variance,
                size=size,
                avg_distance=float(dists.mean()),
                dist_p95=float(np.percentile(dists, 95)),
                avg_vote_fraction=float(votes[members].mean()),
                core=bool(
                    size >= thresholds.core_min_size_frac * n
                    and votes[members].mean() >= thresholds.core_min_vote
                ),
                variance_floored=floored,
            )
        )
    return ClusterModel(class_index=class_index, k=k, support=n, clusters=tuple(clusters))


def log_likelihood(contrib, center, variance) -> float:
    """Independent-Gaussian log-likelihood of a contribution vector under a
    cluster's per-feature center and (floored) variance."""
    c = np.asarray(contrib, dtype=np.float64)
    mu = np.asarray(center, dtype=np.float64)
    var = np.asarray(variance, dtype=np.float64)
    if c.shape != mu.shape or c.shape != var.shape:
        raise PatternError("contribution, center and variance must share a shape")
    if (var < VARIANCE_FLOOR * (1 - 1e-12)).any():
        raise PatternError("variance below the model floor")
    return float(np.sum(-((c - mu) ** 2) / (2.0 * var) - 0.5 * np.log(2.0 * math.pi * var)))


@dataclass
class PatternModel:
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    thresholds: PatternThresholds
    medians: list[MedianPattern | None]
    clusters: list[ClusterModel | None]
    diagnostics: list[list[dict] | None]
    seed: int


def _class_seed(seed: int, class_index: int) -> int:
    state = np.random.SeedSequence(seed, spawn_key=(class_index,)).generate_state(1, np.uint64)
    return int(state[0])


def build_pattern_model(
    cset: ContributionSet,
    labels,
    k: int | None = None,
    k_max: int | None = None,
    seed: int = 7,
    thresholds: PatternThresholds = PatternThresholds(),
) -> PatternModel:
    """Medians plus per-class cluster models from a labeled contribution set.

    Either fix k for every class or derive it per class from the BIC curve
    under the k_max cap (default cap 6): the BIC-minimizing count bounds k
    from above and the curve's elbow below that bound is used, since raw
    information criteria tend to split off outliers into extra clusters.
    Classes with no correctly classified rows get None entries.
    """
    if k is not None and k_max is not None:
        raise PatternError("pass either k or k_max, not both")
    if k is None and k_max is None:
        k_max = 6
    labels = np.asarray(labels, dtype=np.int64)
    medians = class_medians(cset, labels)
    ok = correct_mask(labels, cset.predicted, cset.tie)
    clusters: list[ClusterModel | None] = []
    diagnostics: list[list[dict] | None] = []
    for c in range(len(cset.class_names)):
        mask = ok & (labels == c)
        if not mask.any():
            clusters.append(None)
            diagnostics.append(None)
            continue
        points = cset.values[mask][:, :, c]
        votes = cset.y_hat[mask, c]
        cseed = _class_seed(seed, c)
        if k is None:
            diag = kmeans_diagnostics(points, k_max, cseed)
            kc = next(r["k"] for r in diag if r["knee"])
            diagnostics.append(diag)
        else:
            kc = min(k, points.shape[0])
            diagnostics.append(None)
        clusters.append(
            build_cluster_model(points, votes, c, kc, cseed, thresholds)
        )
    return PatternModel(
        class_names=cset.class_names,
        feature_names=cset.feature_names,
        thresholds=thresholds,
        medians=medians,
        clusters=clusters,
        diagnostics=diagnostics,
        seed=seed,
    )


@dataclass(frozen=True)
class ReliabilityReport:
    predicted_class: int
    tie: bool
    vote_fraction: float
    assigned_cluster: int
    assigned_core: bool
    distance: float
    distance_threshold: float
    trusted: bool
    reasons: tuple[str, ...]
    log_likelihoods: dict


def reliability_report(
    forest: Forest,
    model: PatternModel,
    x,
    tie_seed: int = 7,
    row_id: int | None = None,
) -> ReliabilityReport:
    """Score one instance against the learned contribution patterns.

    Trusted = vote fraction >= vote_trust AND the contribution vector falls in
    a core cluster of the predicted class AND within that cluster's 95th
    percentile member distance. log_likelihoods reports, per class, the best
    core-cluster Gaussian log-likelihood of the instance's contributions
    toward that class (None for classes without core clusters).
    """
    if forest.feature_names != model.feature_names:
        raise PatternError("pattern model feature names do not match the forest")
    if forest.class_names != model.class_names:
        raise PatternError("pattern model class names do not match the forest")
    pred, tie = predict(forest, x, tie_seed=tie_seed,
                        row_ids=None if row_id is None else [row_id])
    y_hat = predict_proba(forest, x)
    fc = feature_contributions_full(forest, x).values
    cm = model.clusters[pred]
    if cm is None:
        raise PatternError(
            f"no cluster model for predicted class {model.class_names[pred]!r}"
        )
    point = fc[:, pred]
    dists = np.array(
        [math.sqrt(float(np.sum((point - cl.center) ** 2))) for cl in cm.clusters]
    )
    assigned = int(np.argmin(dists))
    cl = cm.clusters[assigned]
    vote = float(y_hat[pred])
    reasons = []
    if vote < model.thresholds.vote_trust:
        reasons.append("low_vote_fraction")
    if not cl.core:
        reasons.append("non_core_cluster")
    if dists[assigned] > cl.dist_p95:
        reasons.append("far_from_center")
    lls: dict = {}
    for c, name in enumerate(model.class_names):
        cmc = model.clusters[c]
        cores = [] if cmc is None else [cc for cc in cmc.clusters if cc.core]
        if not cores:
            lls[name] = None
        else:
            lls[name] = max(
                log_likelihood(fc[:, c], cc.center, cc.variance) for cc in cores
            )
    return ReliabilityReport(
        predicted_class=int(pred),
        tie=bool(tie),
        vote_fraction=vote,
        assigned_cluster=assigned,
        assigned_core=bool(cl.core),
        distance=float(dists[assigned]),
        distance_threshold=float(cl.dist_p95),
        trusted=not reasons,
        reasons=tuple(reasons),
        log_likelihoods=lls,
    )


def save_pattern_model(model: PatternModel, path, provenance: dict | None = None) -> None:
    """Serialize to the versioned JSON pattern format (byte-stable)."""
    doc: dict = {"schema_version": SCHEMA_VERSION}
    if provenance is not None:
        doc["provenance"] = provenance
    doc["class_names"] = list(model.class_names)
    doc["feature_names"] = list(model.feature_names)
    doc["thresholds"] = {
        "vote_trust": model.thresholds.vote_trust,
        "core_min_size_frac": model.thresholds.core_min_size_frac,
        "core_min_vote": model.thresholds.core_min_vote,
        "dist_quantile": model.thresholds.dist_quantile,
    }
    doc["seed"] = model.seed
    classes = []
    for c, name in enumerate(model.class_names):
        med = model.medians[c]
        cm = model.clusters[c]
        entry: dict = {
            "class_index": c,
            "class_name": name,
            "support": None if med is None else med.support,
            "median": None if med is None else [float(v) for v in med.median],
            "k": None if cm is None else cm.k,
            "clusters": None,
            "k_diagnostics": model.diagnostics[c],
        }
        if cm is not None:
            entry["clusters"] = [
                {
                    "center": [float(v) for v in cl.center],
                    "variance": [float(v) for v in cl.variance],
                    "size": cl.size,
                    "avg_distance": cl.avg_distance,
                    "dist_p95": cl.dist_p95,
                    "avg_vote_fraction": cl.avg_vote_fraction,
                    "core": cl.core,
                    "variance_floored": cl.variance_floored,
                }
                for cl in cm.clusters
            ]
        classes.append(entry)
    doc["classes"] = classes
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_pattern_model(path) -> PatternModel:
    """Read and validate a pattern file written by save_pattern_model()."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: pattern document must be an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    for key in ("class_names", "feature_names", "thresholds", "classes", "seed"):
        if key not in doc:
            raise SchemaError(f"{path}: missing key {key!r}")
    th = doc["thresholds"]
    try:
        thresholds = PatternThresholds(
            vote_trust=float(th["vote_trust"]),
            core_min_size_frac=float(th["core_min_size_frac"]),
            core_min_vote=float(th["core_min_vote"]),
            dist_quantile=float(th["dist_quantile"]),
        )
    except (KeyError, TypeError) as e:
        raise SchemaError(f"{path}: bad thresholds ({e})") from None
    class_names = tuple(doc["class_names"])
    feature_names = tuple(doc["feature_names"])
    F = len(feature_names)
    if len(doc["classes"]) != len(class_names):
        raise SchemaError(f"{path}: class entry count mismatch")
    medians: list[MedianPattern | None] = []
    clusters: list[ClusterModel | None] = []
    diagnostics: list[list[dict] | None] = []
    for c, entry in enumerate(doc["classes"]):
        if entry.get("class_index") != c:
            raise SchemaError(f"{path}: class entries must be ordered by index")
        med = entry.get("median")
        if med is None:
            medians.append(None)
        else:
            if len(med) != F:
                raise SchemaError(f"{path}: class {c} median has wrong length")
            medians.append(
                MedianPattern(c, int(entry["support"]), np.asarray(med, dtype=np.float64))
            )
        cls = entry.get("clusters")
        if cls is None:
            clusters.append(None)
        else:
            stats = []
            for cl in cls:
                center = np.asarray(cl["center"], dtype=np.float64)
                variance = np.asarray(cl["variance"], dtype=np.float64)
                if center.shape != (F,) or variance.shape != (F,):
                    raise SchemaError(f"{path}: class {c} cluster has wrong width")
                if (variance < VARIANCE_FLOOR * (1 - 1e-12)).any():
                    raise SchemaError(f"{path}: class {c} cluster variance below floor")
                stats.append(
                    ClusterStats(
                        center=center,
                        variance=variance,
                        size=int(cl["size"]),
                        avg_distance=float(cl["avg_distance"]),
                        dist_p95=float(cl["dist_p95"]),
                        avg_vote_fraction=float(cl["avg_vote_fraction"]),
                        core=bool(cl["core"]),
                        variance_floored=bool(cl["variance_floored"]),
                    )
                )
            clusters.append(
                ClusterModel(
                    class_index=c,
                    k=int(entry["k"]),
                    support=sum(s.size for s in stats),
                    clusters=tuple(stats),
                )
            )
        diagnostics.append(entry.get("k_diagnostics"))
    return PatternModel(
        class_names=class_names,
        feature_names=feature_names,
        thresholds=thresholds,
        medians=medians,
        clusters=clusters,
        diagnostics=diagnostics,
        seed=int(doc["seed"]),
    )
