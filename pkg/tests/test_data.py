import numpy as np
import pytest

import rfcontrib as rc
from rfcontrib.data import Dataset
from rfcontrib.errors import DataError


def test_toy_fixture_shape_and_rows(toy):
    assert toy.n_instances == 10
    assert toy.n_classes == 2
    assert toy.feature_names == ("f1", "f2", "f3", "f4")
    assert toy.X[0].tolist() == [6.4, 3.2, 4.5, 1.5]
    assert toy.labels[0] == 0
    assert toy.X[5].tolist() == [7.7, 3.0, 6.1, 2.3]
    assert toy.labels[5] == 1


def test_dataset_validation_rejects_bad_input():
    with pytest.raises(DataError):
        Dataset(("a", "b"), np.array([[1.0, np.nan]]), np.array([0]), ("x", "y"))
    with pytest.raises(DataError):
        Dataset(("a", "a"), np.zeros((2, 2)), np.array([0, 1]), ("x", "y"))
    with pytest.raises(DataError):
        Dataset(("a", "b"), np.zeros((2, 2)), np.array([0, 2]), ("x", "y"))
    with pytest.raises(DataError):
        Dataset(("a", "b"), np.zeros((2, 2)), np.array([0, 0]), ("x",))


def test_subset_and_drop_features(toy):
    sub = toy.subset([5, 6])
    assert sub.n_instances == 2
    assert sub.labels.tolist() == [1, 1]
    dropped = toy.drop_features(["f1", "f4"])
    assert dropped.feature_names == ("f2", "f3")
    assert dropped.X.shape == (10, 2)
    with pytest.raises(DataError):
        toy.drop_features(["nope"])


def test_split_sizes_and_determinism():
    big = Dataset(
        ("a",), np.arange(569, dtype=np.float64)[:, None], np.arange(569) % 2, ("x", "y")
    )
    train, test = rc.split(big, rc.SplitSpec(2.0 / 3.0, 3))
    assert (len(train), len(test)) == (379, 190)
    again, _ = rc.split(big, rc.SplitSpec(2.0 / 3.0, 3))
    assert np.array_equal(train, again)
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(569))


def test_split_clamps_tiny_remainder():
    tiny = Dataset(("a",), np.arange(3, dtype=np.float64)[:, None], np.array([0, 1, 0]), ("x", "y"))
    train, test = rc.split(tiny, rc.SplitSpec(0.99, 1))
    assert (len(train), len(test)) == (2, 1)


def test_split_rounds_half_up():
    five = Dataset(("a",), np.arange(5, dtype=np.float64)[:, None], np.arange(5) % 2, ("x", "y"))
    train, test = rc.split(five, rc.SplitSpec(0.5, 1))
    assert (len(train), len(test)) == (3, 2)


def test_split_rejects_bad_fraction(toy):
    with pytest.raises(DataError):
        rc.split(toy, rc.SplitSpec(1.0, 1))


def test_csv_roundtrip(tmp_path, toy):
    path = tmp_path / "toy.csv"
    rc.write_csv(toy, path)
    back = rc.load_csv(path, "label")
    assert back.feature_names == toy.feature_names
    assert back.class_names == toy.class_names
    assert np.array_equal(back.X, toy.X)
    assert np.array_equal(back.labels, toy.labels)


def test_load_csv_class_order_is_first_appearance(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,label\n1,zebra\n2,ant\n3,zebra\n")
    ds = rc.load_csv(path, "label")
    assert ds.class_names == ("zebra", "ant")
    assert ds.labels.tolist() == [0, 1, 0]
    forced = rc.load_csv(path, "label", class_order=("ant", "zebra"))
    assert forced.labels.tolist() == [1, 0, 1]


def test_load_csv_single_class_rejected(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("a,label\n1,x\n2,x\n")
    with pytest.raises(DataError, match="fewer than two"):
        rc.load_csv(path, "label")


def test_load_csv_na_cell_names_row_and_column(tmp_path):
    path = tmp_path / "na.csv"
    path.write_text("a,b,label\n1,2,x\n3,NA,y\n")
    with pytest.raises(DataError, match=r"row 2.*'b'"):
        rc.load_csv(path, "label")


def test_load_csv_unknown_label_under_class_order(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text("a,label\n1,x\n2,q\n")
    with pytest.raises(DataError, match="unknown class 'q'"):
        rc.load_csv(path, "label", class_order=("x", "y"))


def test_load_csv_missing_label_column(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match="no column named"):
        rc.load_csv(path, "label")
