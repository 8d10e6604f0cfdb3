import time

import numpy as np
import pytest

import rfcontrib as rc
from rfcontrib import analysis
from rfcontrib import datasets as rds


@pytest.fixture(scope="session", autouse=True)
def warm_forest_kernel():
    """Pay the one-off tree-growth compile cost outside any timed section."""
    ds = rc.fixture_iris_toy()
    rc.fit(ds, np.arange(ds.n_instances), rc.ForestParams(trees=2, seed=1))


@pytest.fixture(scope="session")
def toy():
    return rc.fixture_iris_toy()


@pytest.fixture(scope="session")
def toy_forest():
    return rc.fixture_iris_toy_forest()


@pytest.fixture(scope="session")
def iris():
    return rds.iris()


@pytest.fixture(scope="session")
def bcw():
    return rds.bcw()


@pytest.fixture(scope="session")
def bcw_red():
    return rds.bcw_reduced()


@pytest.fixture(scope="session")
def toy_files(tmp_path_factory, toy, toy_forest):
    """Fixture dataset CSV plus its forest JSON, for CLI tests."""
    root = tmp_path_factory.mktemp("toyfiles")
    csv_path = root / "toy.csv"
    model_path = root / "toy_model.json"
    rc.write_csv(toy, csv_path)
    rc.save(toy_forest, model_path)
    return {"csv": str(csv_path), "model": str(model_path), "dir": root}


@pytest.fixture(scope="session")
def bcw_experiments(bcw_red):
    """Ten seeded 2/3-split 500-tree models with their train contributions.

    Shared by the accuracy, median, cluster-structure and likelihood tests;
    build_seconds records the wall time of the whole construction.
    """
    out = []
    t0 = time.perf_counter()
    for seed in range(1, 11):
        train_idx, test_idx = rc.split(bcw_red, rc.SplitSpec(2.0 / 3.0, seed))
        forest = rc.fit(bcw_red, train_idx, rc.ForestParams(trees=500, seed=seed))
        pred, tie = rc.predict(forest, bcw_red.X[test_idx], tie_seed=7, row_ids=test_idx)
        accuracy = float(np.mean(pred == bcw_red.labels[test_idx]))
        cset = rc.contributions_matrix(forest, bcw_red, rows=train_idx)
        medians = rc.class_medians(cset, bcw_red.labels[train_idx])
        out.append(
            {
                "seed": seed,
                "train": train_idx,
                "test": test_idx,
                "forest": forest,
                "accuracy": accuracy,
                "cset": cset,
                "medians": medians,
            }
        )
    return {"runs": out, "build_seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def bcw_robustness(bcw_red):
    """One hundred independent 500-tree models with holdout instance 3."""
    config = analysis.RobustnessConfig(models=100, trees=500, seed=7, holdout=3)
    t0 = time.perf_counter()
    result = analysis.robustness_run(bcw_red, config)
    return {"result": result, "seconds": time.perf_counter() - t0}
