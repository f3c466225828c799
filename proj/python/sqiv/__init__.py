"""Smoothed MM/GMM estimation for instrumental-variables quantile models."""

from ._core import (
    SolverError,
    SqivError,
    decile_table,
    dgp_truth,
    estimate_euler,
    estimate_linear,
    gen_dgp,
    kernel_moment,
    robust_rmse,
    run_cli,
    run_monte_carlo,
    smoothed_indicator,
    smoothed_indicator_deriv,
    smoothed_moments,
    synthetic_macro_series,
)

__all__ = [
    "SolverError",
    "SqivError",
    "decile_table",
    "dgp_truth",
    "estimate_euler",
    "estimate_linear",
    "gen_dgp",
    "kernel_moment",
    "robust_rmse",
    "run_cli",
    "run_monte_carlo",
    "smoothed_indicator",
    "smoothed_indicator_deriv",
    "smoothed_moments",
    "synthetic_macro_series",
]
