"""Accident severity classification with a from-scratch Random Forest.

Cleaning, univariate screening, rebalancing, CART/Random Forest training,
evaluation and importance ranking over tabular accident records.
"""

__version__ = "0.1.0"

from .table import ColumnSpec, ColumnTable, MISSING, read_csv, write_csv  # noqa: E402
from .prep import CleaningConfig, clean  # noqa: E402
from .stats import TestResult  # noqa: E402
from .screening import screen_all  # noqa: E402
from .partition import RebalanceConfig, rebalance, train_test_split  # noqa: E402
from .encoding import FeatureEncoder  # noqa: E402
from .forest import (  # noqa: E402
    DecisionTree, ForestConfig, ForestModel, RandomForest, best_split, importance_mdg,
    load_model, predict, predict_proba, save_model, train_forest,
)
from .evaluate import auc, compare_models, confusion, cv_auc, metrics, roc_curve  # noqa: E402

__all__ = [
    "ColumnSpec", "ColumnTable", "MISSING", "read_csv", "write_csv", "CleaningConfig", "clean",
    "TestResult", "screen_all", "RebalanceConfig", "rebalance", "train_test_split", "FeatureEncoder",
    "DecisionTree", "ForestConfig", "ForestModel", "RandomForest", "best_split", "importance_mdg",
    "load_model", "predict", "predict_proba", "save_model", "train_forest", "auc", "compare_models",
    "confusion", "cv_auc", "metrics", "roc_curve",
]
