"""Regression-based prioritization of a product's test suite."""

from .logistic import FactorSelection, LogisticIRLS, RegressionModel, select_significant_factors
from .metrics import RankingMetrics, evaluate_ranking
from .ranking import RankedTest, rank_test_cases
from .stats import norm_cdf, wald_p_value
from .training import (FACTORS, ExecutionRecord, TestFeatures, TrainingRow, build_training_set, design_matrix,
                       failing_tests, load_features, load_history, outcomes, ranking_rows)

__all__ = [
    "FACTORS", "ExecutionRecord", "FactorSelection", "LogisticIRLS", "RankedTest", "RankingMetrics",
    "RegressionModel", "TestFeatures", "TrainingRow", "build_training_set", "design_matrix",
    "evaluate_ranking", "failing_tests", "load_features", "load_history", "norm_cdf", "outcomes",
    "rank_test_cases", "ranking_rows", "select_significant_factors", "wald_p_value",
]
