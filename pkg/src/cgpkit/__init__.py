"""Composite Gaussian processes: recursive segmented inference and analysis."""

from .errors import (
    CgpError,
    ConfigError,
    DegenerateInducing,
    DimensionMismatch,
    EmptySeries,
    FactorizationFailure,
    InvalidInput,
    InvalidRange,
    InvalidTransform,
    OptimizerDiverged,
    ParseError,
)
from .exact import (
    DataSegment,
    FisherInfo,
    FitResult,
    GaussianBelief,
    fisher_information,
    gp_posterior,
    log_marginal_likelihood,
    ml_estimate,
    prior_belief,
)
from .kernels import Hyperparams, KernelSpec, MeanSpec, gram, kernel_eval, kernel_grad
from .psd import PsdMatrix, block_inverse_2x2, cholesky_jittered, logdet_psd, solve_psd
from .recursive import (
    CgpState,
    FusionState,
    cgp_init,
    cgp_run,
    cgp_update,
    fused_theta,
    fusion_init,
    fusion_merge,
    fusion_update,
)
from .sparse import InducingSet, fitc_posterior, place_uniform

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
