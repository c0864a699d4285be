"""Class-selectivity regularizer toolkit: metrics, PWCCA, projection bounds."""

from selstudy._core import (
    baseline_distances,
    bootstrap_ci,
    compare_groups,
    cross_distances,
    dead_units,
    layer_selectivity,
    make_dataset,
    network_mean_si,
    optimize_projection,
    orthonormality_error,
    paired_t_test,
    precision,
    projected_selectivity,
    pwcca_distance,
    regularized_loss,
    selectivity_index,
    shift_nonneg,
    spearman_correlation,
    t95,
    train_run,
)

__all__ = [
    "baseline_distances",
    "bootstrap_ci",
    "compare_groups",
    "cross_distances",
    "dead_units",
    "layer_selectivity",
    "make_dataset",
    "network_mean_si",
    "optimize_projection",
    "orthonormality_error",
    "paired_t_test",
    "precision",
    "projected_selectivity",
    "pwcca_distance",
    "regularized_loss",
    "selectivity_index",
    "shift_nonneg",
    "spearman_correlation",
    "t95",
    "train_run",
]
