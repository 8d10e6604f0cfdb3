"""Reference datasets re-expressed in this package's conventions.

Requires scikit-learn (the `datasets` extra), used purely as a data source.
Run ``python -m rfcontrib.datasets <name> --out file.csv`` to export a CSV
ready for the CLI.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .data import Dataset, write_csv

# Columns whose removal leaves the 17-feature reduced matrix used by the
# reference experiments (1-based positions in the 30-column file order).
BCW_DROP = (
    "F1", "F3", "F8", "F10", "F11", "F12", "F13",
    "F15", "F19", "F20", "F21", "F24", "F26",
)


def _sklearn_datasets():
    try:
        from sklearn import datasets as skd
    except ImportError:
        raise ImportError(
            "scikit-learn is required for the bundled datasets; "
            "install the 'datasets' extra"
        ) from None
    return skd


def bcw() -> Dataset:
    """Breast Cancer Wisconsin (diagnostic): 569 rows, features F1..F30 in
    data-file order, benign = 0 and malignant = 1."""
    skd = _sklearn_datasets()
    raw = skd.load_breast_cancer()
    labels = (raw.target == 0).astype(np.int64)  # source encodes malignant as 0
    names = tuple(f"F{i + 1}" for i in range(raw.data.shape[1]))
    return Dataset(names, raw.data, labels, ("benign", "malignant"))


def bcw_reduced() -> Dataset:
    """BCW with the 13 dropped columns removed (17 features remain)."""
    return bcw().drop_features(BCW_DROP)


def iris() -> Dataset:
    """Iris: 150 rows, 4 features, classes setosa/versicolor/virginica."""
    skd = _sklearn_datasets()
    raw = skd.load_iris()
    names = ("sepal_length", "sepal_width", "petal_length", "petal_width")
    return Dataset(names, raw.data, raw.target.astype(np.int64),
                   ("setosa", "versicolor", "virginica"))


_EXPORTS = {"bcw": bcw, "bcw_reduced": bcw_reduced, "iris": iris}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m rfcontrib.datasets",
        description="export a bundled reference dataset as CSV",
    )
    parser.add_argument("name", choices=sorted(_EXPORTS))
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--label-column", default="label")
    args = parser.parse_args(argv)
    ds = _EXPORTS[args.name]()
    write_csv(ds, args.out, label_column=args.label_column)
    sys.stderr.write(f"wrote {ds.n_instances} rows to {args.out}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
