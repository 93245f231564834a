"""Recurrence quantification of latent generation trajectories."""

from ._core import (
    ConfigError,
    FormatError,
    RqaError,
    ValidationError,
    analyze,
    build_features,
    classify,
    cosine_distance,
    dfa_exponent,
    linear_slope,
    mcnemar,
    metric_series,
    quantify_matrix,
    read_trajectory,
    recurrence_matrix,
    search_space_size,
    select_epsilon,
    synth,
    temporal_features,
    write_trajectory,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "RqaError",
    "ValidationError",
    "analyze",
    "build_features",
    "classify",
    "cosine_distance",
    "dfa_exponent",
    "linear_slope",
    "mcnemar",
    "metric_series",
    "quantify_matrix",
    "read_trajectory",
    "recurrence_matrix",
    "search_space_size",
    "select_epsilon",
    "synth",
    "temporal_features",
    "write_trajectory",
]
