"""Bayesian wavelet shrinkage with a point mass plus MOM and IMOM nonlocal slabs,
hyperparameters chosen by empirical Bayes."""

from .transform import (
    SUPPORTED_FILTERS,
    CoefficientPyramid,
    WaveletFilter,
    default_depth,
    dwt,
    filter_taps,
    idwt,
)
from .priors import (
    LaplaceFit,
    NumericalError,
    PriorParams,
    imom_density,
    laplace_fit,
    m_star,
    m_star_star,
    mixture_prior_density,
    mom_density,
)
from .hyperspec import METHOD_NAMES, MethodConfig, SpecConfig, level_arrays
from .ebayes import DegenerateNoiseError, FitError, FitResult, estimate_sigma_mad, fit
from .posterior import (
    PipelineError,
    ShrinkageSummary,
    denoise,
    log_odds,
    posterior_mean_coeff,
    posterior_probs,
    shrink_pyramid,
)
from .io_cli import AudioBuffer, BlockPlan, cli_main, process_blocks

__version__ = "0.1.0"
