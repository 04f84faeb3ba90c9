"""Covariate-indexed time-varying spectral estimation for replicated series."""

__version__ = "0.1.0"

from .dataset import DataError, TimeSeriesSet, demean, load_dataset, make_dataset, save_dataset
from .periodogram import FourierGrid, Periodogram, fourier_grid, local_periodograms, periodogram
from .basis import BasisMatrix, PenaltyMatrix, build_basis, log_spectrum_eval, penalty_matrix
from .partition import (
    CovariatePartition,
    PartitionError,
    TimePartition,
    log_prior_covariate_partition,
    log_prior_m,
    log_prior_time_partition,
    relocation_kernel_covariate,
    relocation_kernel_time,
)
from .whittle import (
    BlockData,
    BlockParams,
    LaplaceError,
    LaplaceProposal,
    Tau2Prior,
    block_log_whittle,
    gibbs_tau2,
    grad_hessian,
    laplace_approx,
    log_conditional_posterior,
)
from .sampler import ChainRecord, ConfigError, Sampler, SamplerConfig, run_chain
from .simulate import (
    gen_ar1,
    gen_piecewise_ar,
    gen_slowly_varying_ar,
    ar1_true_log_spectrum,
    subject_covariates,
)

__all__ = [
    "__version__",
    "DataError",
    "TimeSeriesSet",
    "demean",
    "load_dataset",
    "make_dataset",
    "save_dataset",
    "FourierGrid",
    "Periodogram",
    "fourier_grid",
    "local_periodograms",
    "periodogram",
    "BasisMatrix",
    "PenaltyMatrix",
    "build_basis",
    "log_spectrum_eval",
    "penalty_matrix",
    "CovariatePartition",
    "PartitionError",
    "TimePartition",
    "log_prior_covariate_partition",
    "log_prior_m",
    "log_prior_time_partition",
    "relocation_kernel_covariate",
    "relocation_kernel_time",
    "BlockData",
    "BlockParams",
    "LaplaceError",
    "LaplaceProposal",
    "Tau2Prior",
    "block_log_whittle",
    "gibbs_tau2",
    "grad_hessian",
    "laplace_approx",
    "log_conditional_posterior",
    "ChainRecord",
    "ConfigError",
    "Sampler",
    "SamplerConfig",
    "run_chain",
    "gen_ar1",
    "gen_piecewise_ar",
    "gen_slowly_varying_ar",
    "ar1_true_log_spectrum",
    "subject_covariates",
]
