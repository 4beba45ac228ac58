"""Mixture-model Bayesian predictive synthesis."""

from ._core import (
    Gaussian,
    MixbpsError,
    StudentT,
    Tuning,
    WeightShape,
    fit_dirichlet,
    fit_fixture,
    fit_niw,
    fit_series,
    main,
    make_fixture,
    r2_from_r3,
    r3_from_r2,
    sample_niw,
    single_agent_update,
    synthesize,
    well_geometry,
)

__all__ = [
    "Gaussian",
    "MixbpsError",
    "StudentT",
    "Tuning",
    "WeightShape",
    "fit_dirichlet",
    "fit_fixture",
    "fit_niw",
    "fit_series",
    "main",
    "make_fixture",
    "r2_from_r3",
    "r3_from_r2",
    "sample_niw",
    "single_agent_update",
    "synthesize",
    "well_geometry",
]
