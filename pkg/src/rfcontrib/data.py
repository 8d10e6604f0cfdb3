"""Dataset container, CSV round-trip and deterministic train/test splitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix with integer labels and name tables for both axes.

    Labels index into ``class_names``; features are float64 and must be finite.
    """

    feature_names: tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        if X.ndim != 2:
            raise DataError("feature matrix must be two-dimensional")
        if X.shape[1] != len(self.feature_names):
            raise DataError(
                f"{len(self.feature_names)} feature names for {X.shape[1]} columns"
            )
        if labels.shape != (X.shape[0],):
            raise DataError("labels must align with feature matrix rows")
        if len(self.class_names) < 2:
            raise DataError("a dataset needs at least two classes")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("duplicate feature name")
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("duplicate class name")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DataError("label index out of range")
        if not np.isfinite(X).all():
            raise DataError("feature matrix contains a non-finite value")

    @property
    def n_instances(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, rows) -> "Dataset":
        """New dataset holding only ``rows`` (class table unchanged)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.feature_names, self.X[rows], self.labels[rows], self.class_names)

    def drop_features(self, names) -> "Dataset":
        """New dataset without the named feature columns."""
        drop = set(names)
        missing = drop - set(self.feature_names)
        if missing:
            raise DataError(f"cannot drop unknown feature(s): {sorted(missing)}")
        keep = [i for i, f in enumerate(self.feature_names) if f not in drop]
        if not keep:
            raise DataError("cannot drop every feature")
        kept_names = tuple(self.feature_names[i] for i in keep)
        return Dataset(kept_names, self.X[:, keep], self.labels, self.class_names)


@dataclass(frozen=True)
class SplitSpec:
    """Train fraction in (0, 1) plus the permutation seed."""

    train_fraction: float
    seed: int


def split(ds: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, exhaustive train/test row indices, sorted ascending.

    The train size is round-half-up of ``train_fraction * n``, clamped so both
    sides keep at least one row. The same (dataset size, spec) always produces
    the same partition.
    """
    if not 0.0 < spec.train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    n = ds.n_instances
    if n < 2:
        raise DataError("need at least two rows to split")
    n_train = int(np.floor(spec.train_fraction * n + 0.5))
    n_train = max(1, min(n - 1, n_train))
    perm = np.random.default_rng(spec.seed).permutation(n)
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:])
    return train, test


def load_csv(path, label_column: str, class_order=None) -> Dataset:
    """Read a headered CSV where every non-label column is a numeric feature.

    Class names come from ``class_order`` when given, otherwise from the
    labels' first appearance in the file. Unknown labels (under
    ``class_order``) and non-numeric feature cells raise DataError naming the
    offending cell.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column name in header")
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        rows: list[list[float]] = []
        label_strs: list[str] = []
        for rno, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise DataError(f"{path}: data row {rno} has {len(rec)} cells, expected {len(header)}")
            vals = []
            for i in feat_idx:
                try:
                    vals.append(float(rec[i]))
                except ValueError:
                    raise DataError(
                        f"{path}: data row {rno}, column {header[i]!r}: "
                        f"could not parse {rec[i]!r} as a number"
                    ) from None
            rows.append(vals)
            label_strs.append(rec[label_idx])
    if class_order is not None:
        class_names = tuple(class_order)
        if len(set(class_names)) != len(class_names):
            raise DataError("duplicate class name in class order")
    else:
        class_names = tuple(dict.fromkeys(label_strs))
        if len(class_names) < 2:
            raise DataError(f"{path}: fewer than two distinct classes")
    index = {c: k for k, c in enumerate(class_names)}
    labels = np.empty(len(label_strs), dtype=np.int64)
    for i, s in enumerate(label_strs):
        if s not in index:
            raise DataError(f"{path}: data row {i + 1}: unknown class {s!r}")
        labels[i] = index[s]
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return Dataset(feature_names, X, labels, class_names)


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    """Write the dataset so that load_csv recovers it exactly (repr floats)."""
    if label_column in ds.feature_names:
        raise DataError(f"label column {label_column!r} collides with a feature name")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [label_column])
        for i in range(ds.n_instances):
            writer.writerow(
                [repr(v) for v in ds.X[i].tolist()] + [ds.class_names[ds.labels[i]]]
            )


_IRIS_TOY_ROWS = (
    (6.4, 3.2, 4.5, 1.5, 0),
    (6.3, 2.5, 4.9, 1.5, 0),
    (6.4, 2.9, 4.3, 1.3, 0),
    (5.5, 2.5, 4.0, 1.3, 0),
    (5.5, 2.6, 4.4, 1.2, 0),
    (7.7, 3.0, 6.1, 2.3, 1),
    (6.4, 3.1, 5.5, 1.8, 1),
    (6.0, 3.0, 4.8, 1.8, 1),
    (6.7, 3.3, 5.7, 2.5, 1),
    (6.5, 3.0, 5.2, 2.0, 1),
)


def fixture_iris_toy() -> Dataset:
    """Ten-instance two-class Iris subset used by the worked golden example."""
    arr = np.asarray(_IRIS_TOY_ROWS, dtype=np.float64)
    return Dataset(
        feature_names=("f1", "f2", "f3", "f4"),
        X=arr[:, :4],
        labels=arr[:, 4].astype(np.int64),
        class_names=("versicolor", "virginica"),
    )
