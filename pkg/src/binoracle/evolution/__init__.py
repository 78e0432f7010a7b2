"""Similarity transform, hierarchical Beta regression and its diagnostics."""
from .diagnostics import DegenerateVariance, TooFewDraws, hdi, rhat, split_chains
from .model import (ChainCountTooSmall, Dataset, ModelSpec, NonFiniteLikelihood, ParamSummary, PosteriorSummary,
                    SamplerConfig, fit_model, global_names, make_dataset, parameter_names, simulate, summarize)
from .ppc import NotConverged, PpcReport, posterior_predictive_check, replicate
from .records import (COVARIATES, Observations, Prepared, fit_report, prepare, read_draws, read_observations,
                      write_draws, write_fit_report, write_observations)
from .transform import (DegenerateQuantiles, NonpositiveTau, Standardized, ZeroVariance, fit_tau, squeeze,
                        standardize, transform_distance)

__all__ = [
    "COVARIATES", "ChainCountTooSmall", "Dataset", "DegenerateQuantiles", "DegenerateVariance", "ModelSpec",
    "NonFiniteLikelihood", "NonpositiveTau", "NotConverged", "Observations", "ParamSummary", "PosteriorSummary",
    "PpcReport", "Prepared", "SamplerConfig", "Standardized", "TooFewDraws", "ZeroVariance", "fit_model",
    "fit_report", "fit_tau", "global_names", "hdi", "make_dataset", "parameter_names", "posterior_predictive_check",
    "prepare", "read_draws", "read_observations", "replicate", "rhat", "simulate", "split_chains", "squeeze",
    "standardize", "summarize", "transform_distance", "write_draws", "write_fit_report", "write_observations",
]
