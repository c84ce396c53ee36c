"""Initialization strategies for EM on Gaussian mixture models, plus a benchmark harness."""

from .core import (
    GaussianComponent,
    GmmParams,
    as_data_matrix,
    cholesky,
    gaussian_log_pdf,
    log_likelihood,
    mahalanobis_sq,
    min_mahalanobis,
    mixture_log_pdf,
    mle_single_gaussian,
)
from .em import EmConfig, EmTrace, em_run, em_step
from .init import STANDARD_METHODS, MethodKind, MethodSpec, means2gmm, run_method

__version__ = "0.1.0"
