"""Bayesian deconvolution of XANES-like spectra by exchange Monte Carlo."""

from .errors import (ConfigError, DegenerateInputError, DomainError, InsufficientSamplesError,
                     InvalidInputError, ParseError, XanesEmcError)
from .evidence import (EvidenceTable, SelectionResult, estimate_log_ztilde, free_energy,
                       free_energy_profile, map_estimate, marginals, model_evidence,
                       peak_count_posterior, select_model, summarize)
from .model import (Dataset, Peak, PeakConfig, SpectralParams, StepParams, error_function,
                    evaluate_model, evaluate_peaks, evaluate_step)
from .priors import (CONVENTIONAL, PROPOSED, DistributionSpec, ModelSpec, PriorSet,
                     default_hyperparams, log_density, log_prior, sample_prior)
from .sampler import (ChainState, ReplicaLadder, SampleRecord, SamplerConfig, autocorrelation,
                      build_ladder, exchange_probability, exchange_step, metropolis_sweep,
                      run_emc)
from .synthetic import TruthSpec, default_truth, synthesize

__version__ = "0.1.0"

__all__ = [
    "TruthSpec",
    "default_truth",
    "synthesize",
    "ConfigError",
    "DegenerateInputError",
    "DomainError",
    "InsufficientSamplesError",
    "InvalidInputError",
    "ParseError",
    "XanesEmcError",
    "EvidenceTable",
    "SelectionResult",
    "estimate_log_ztilde",
    "free_energy",
    "free_energy_profile",
    "map_estimate",
    "marginals",
    "model_evidence",
    "peak_count_posterior",
    "select_model",
    "summarize",
    "Dataset",
    "Peak",
    "PeakConfig",
    "SpectralParams",
    "StepParams",
    "error_function",
    "evaluate_model",
    "evaluate_peaks",
    "evaluate_step",
    "CONVENTIONAL",
    "PROPOSED",
    "DistributionSpec",
    "ModelSpec",
    "PriorSet",
    "default_hyperparams",
    "log_density",
    "log_prior",
    "sample_prior",
    "ChainState",
    "ReplicaLadder",
    "SampleRecord",
    "SamplerConfig",
    "autocorrelation",
    "build_ladder",
    "exchange_probability",
    "exchange_step",
    "metropolis_sweep",
    "run_emc",
]
