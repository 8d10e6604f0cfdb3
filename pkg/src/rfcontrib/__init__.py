"""Random-forest classification with per-instance feature contributions,
contribution-pattern clustering and prediction-reliability scoring."""

from .analysis import (
    ImportanceReport,
    RobustnessConfig,
    RobustnessResult,
    gini_importance,
    oob_accuracy,
    permutation_importance,
    robustness_run,
)
from .contrib import (
    ContributionSet,
    ContributionVector,
    annotate_node_distributions,
    check_unanimity,
    contributions_matrix,
    feature_contributions,
    feature_contributions_full,
    verify_decomposition,
)
from .data import Dataset, SplitSpec, fixture_iris_toy, load_csv, split, write_csv
from .errors import (
    DataError,
    ModelConsistencyError,
    PatternError,
    RfContribError,
    SchemaError,
    UsageError,
)
from .forest import (
    Forest,
    ForestParams,
    Tree,
    best_split,
    fit,
    fixture_iris_toy_forest,
    gini_impurity,
    load,
    predict,
    predict_proba,
    save,
    validate_forest,
    vote_counts,
)
from .patterns import (
    ClusterModel,
    ClusterStats,
    MedianPattern,
    PatternModel,
    PatternThresholds,
    ReliabilityReport,
    build_cluster_model,
    build_pattern_model,
    choose_k,
    class_medians,
    kmeans,
    kmeans_diagnostics,
    load_pattern_model,
    log_likelihood,
    reliability_report,
    save_pattern_model,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "SplitSpec",
    "load_csv",
    "write_csv",
    "split",
    "fixture_iris_toy",
    "Forest",
    "ForestParams",
    "Tree",
    "gini_impurity",
    "best_split",
    "fit",
    "predict",
    "predict_proba",
    "vote_counts",
    "save",
    "load",
    "validate_forest",
    "fixture_iris_toy_forest",
    "ContributionVector",
    "ContributionSet",
    "annotate_node_distributions",
    "check_unanimity",
    "feature_contributions",
    "feature_contributions_full",
    "contributions_matrix",
    "verify_decomposition",
    "MedianPattern",
    "PatternThresholds",
    "ClusterStats",
    "ClusterModel",
    "PatternModel",
    "ReliabilityReport",
    "class_medians",
    "kmeans",
    "kmeans_diagnostics",
    "choose_k",
    "build_cluster_model",
    "build_pattern_model",
    "log_likelihood",
    "reliability_report",
    "save_pattern_model",
    "load_pattern_model",
    "ImportanceReport",
    "RobustnessConfig",
    "RobustnessResult",
    "gini_importance",
    "oob_accuracy",
    "permutation_importance",
    "robustness_run",
    "RfContribError",
    "DataError",
    "SchemaError",
    "ModelConsistencyError",
    "PatternError",
    "UsageError",
]
