"""Data-dependent PAC-Bayes priors: bounds, toy model, and SGD certificates."""

from ._core import (
    ConfigError,
    DataError,
    NumericError,
    binary_kl,
    evaluate_bound,
    get_bound,
    kl_diag,
    kl_inverse,
    kl_isotropic,
    linear_bound,
    maurer_b_term,
    optimal_beta_bound,
    run_cli,
    toy_sweep,
    union_adjusted_delta,
    variational_kl_bound,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "binary_kl",
    "evaluate_bound",
    "get_bound",
    "kl_diag",
    "kl_inverse",
    "kl_isotropic",
    "linear_bound",
    "maurer_b_term",
    "optimal_beta_bound",
    "run_cli",
    "toy_sweep",
    "union_adjusted_delta",
    "variational_kl_bound",
]
