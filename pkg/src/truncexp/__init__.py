"""Maximum-likelihood inference for exponential lifespans observed in a
double-truncated, censored panel."""

from .estimator import (
    FitError,
    FitResult,
    ObservedRecord,
    SufficientStats,
    confidence_interval,
    fit_mle,
    population_size_estimate,
    profiled_objective,
    standard_error,
    summarize,
)
from .model import DomainError, ObservedTriple, ParamDomain, StudyWindow, alpha, eta

__version__ = "0.1.0"
