"""Phase-noise estimation for oscillators with colored noise sources."""

from .baselines import DctOptions, dct_estimate, white_eks
from .detection import iterate, posterior_soft_symbols
from .errors import PhaseNoiseError
from .increments import (
    PhaseIncrementModel,
    PhaseTrajectory,
    PriorCovariance,
    TailRule,
    autocorrelation,
    build_prior_covariance,
    fit_ar,
    sample_trajectory,
)
from .kalman import AugmentedStateModel, SmootherResult, build_augmented_model, eks_smooth
from .map import (
    EstimateResult,
    MapOptions,
    error_covariance_check,
    estimate_map,
    gradient,
    hessian,
    log_posterior,
    ml_pilot_init,
    soft_bcrb,
)
from .signal import (
    Constellation,
    ObservationBlock,
    PilotPattern,
    gray_qam,
    make_observation,
    snr_db_to_noise_variance,
    transmit,
    uniform_pilots,
)

__version__ = "0.1.0"
