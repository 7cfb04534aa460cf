"""Two-point laws and covariances of the Airy1 and Airy2 processes, and Monte
Carlo estimates of the matching largest-eigenvalue covariances for GOE/GUE
matrix diffusions."""

from .covariance import (
    CovCurve,
    covariance_curve,
    covariance_point,
    derivative_at_zero,
    one_point_moments,
)
from .fredholm import JointProblem, evaluate_with_error_control
from .kernels import KernelSlot, Process
from .processes import TwoPointQuery, one_point_cdf, two_point_cdf
from .rmt import Ensemble, EnsembleConfig, autocovariance, run_chain

__version__ = "0.1.0"

__all__ = [
    "CovCurve",
    "Ensemble",
    "EnsembleConfig",
    "JointProblem",
    "KernelSlot",
    "Process",
    "TwoPointQuery",
    "autocovariance",
    "covariance_curve",
    "covariance_point",
    "derivative_at_zero",
    "evaluate_with_error_control",
    "one_point_cdf",
    "one_point_moments",
    "run_chain",
    "two_point_cdf",
]
