"""Marked log-Gaussian Cox process models on triangulated domains."""

from ._core import (
    CoxmeshError,
    Domain,
    Mesh,
    SpdeParams,
    build_mesh,
    fit_config,
    integrate_intensity,
    k_inhom,
    marginal_variance,
    matern_cov,
    normalize_k,
    pointwise_scores,
    precision,
    run_cli,
    simulate_field,
    simulate_pattern,
)

__version__ = "0.1.0"

__all__ = [
    "CoxmeshError",
    "Domain",
    "Mesh",
    "SpdeParams",
    "build_mesh",
    "fit_config",
    "integrate_intensity",
    "k_inhom",
    "marginal_variance",
    "matern_cov",
    "normalize_k",
    "pointwise_scores",
    "precision",
    "run_cli",
    "simulate_field",
    "simulate_pattern",
]
