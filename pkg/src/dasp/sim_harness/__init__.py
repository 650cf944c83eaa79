"""Simulation scenarios, evaluation metrics and exact leave-one-out."""

from .loo import LooResult, compare_loo, loo_exact
from .metrics import (CoverageReport, MetricsReport, RmseSplit, coverage_metrics, credible_intervals, delta, elpd,
                      evaluate, meff_draws, pointwise_elpd, predictive_log_density, rmse_split, roc_auc, roc_curve)
from .scenarios import ScenarioSpec, SimulatedData, block_indices, generate

__all__ = [
    "CoverageReport", "LooResult", "MetricsReport", "RmseSplit", "ScenarioSpec", "SimulatedData",
    "block_indices", "compare_loo", "coverage_metrics", "credible_intervals", "delta", "elpd", "evaluate",
    "generate", "loo_exact", "meff_draws", "pointwise_elpd", "predictive_log_density", "rmse_split",
    "roc_auc", "roc_curve",
]
