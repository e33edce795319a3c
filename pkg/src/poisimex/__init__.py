"""Measurement-error-corrected regression for count-based biomarker densities.

Biomarkers read off small tissue cores are counts, so the observed density
W/A is only a conditionally Poisson estimate of the true cell density X.
This package provides a simulation-extrapolation correction for that error
structure (heteroscedastic, non-Gaussian, single replicate), the naive /
truth / corrected-score linear benchmarks, a censored log-normal AFT
fitter, survival utilities, and a reproducible Monte Carlo study harness.
"""

from .data import Dataset, ObservedUnit, surrogate_density
from .distributions import (
    Binomial,
    Gamma,
    NegBinomial,
    Normal,
    PointMass,
    Poisson,
    Uniform,
    sample_distribution,
)
from .estimators import (
    AttenuationInputs,
    ModelFit,
    attenuation_factor,
    fit_aft_lognormal,
    fit_corrected_lm,
    fit_ols,
)
from .harness import (
    MCSummary,
    StudySpec,
    batch_mean_mcse,
    emit_table,
    parse_table,
    run_study,
)
from .rng import RngStream
from .scenarios import (
    BinomialSurrogate,
    GammaScaledByZ,
    NegBinomialSurrogate,
    PoissonSurrogate,
    RegressionTruth,
    ScenarioSpec,
    calibrated_censoring_scale,
    generate_dataset,
    with_sample_size,
)
from .simex import (
    SimexConfig,
    SimexResult,
    estimate_sigma,
    extrapolate,
    fit_extrapolant,
    generate_pseudo_dataset,
    run_simex,
    simex_variance_bootstrap,
    simex_variance_difference,
)
from .survival import SurvivalCurve, km_curve, logrank_test

__version__ = "0.1.0"

__all__ = [
    "AttenuationInputs",
    "Binomial",
    "BinomialSurrogate",
    "Dataset",
    "Gamma",
    "GammaScaledByZ",
    "MCSummary",
    "ModelFit",
    "NegBinomial",
    "NegBinomialSurrogate",
    "Normal",
    "ObservedUnit",
    "PointMass",
    "Poisson",
    "PoissonSurrogate",
    "RegressionTruth",
    "RngStream",
    "ScenarioSpec",
    "SimexConfig",
    "SimexResult",
    "StudySpec",
    "SurvivalCurve",
    "Uniform",
    "attenuation_factor",
    "batch_mean_mcse",
    "calibrated_censoring_scale",
    "emit_table",
    "estimate_sigma",
    "extrapolate",
    "fit_aft_lognormal",
    "fit_corrected_lm",
    "fit_extrapolant",
    "fit_ols",
    "generate_dataset",
    "generate_pseudo_dataset",
    "km_curve",
    "logrank_test",
    "parse_table",
    "run_simex",
    "run_study",
    "sample_distribution",
    "simex_variance_bootstrap",
    "simex_variance_difference",
    "surrogate_density",
    "with_sample_size",
]
