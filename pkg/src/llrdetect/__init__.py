"""Cumulative LLR detection of small deviations in linear Gaussian systems."""

__version__ = "0.1.0"

from .covariance import (  # noqa: E402
    DetectabilityMatrix,
    OutputCovarianceBasis,
    approx_output_cov,
    detectability,
    exact_output_cov,
    fisher_matrix,
    nominal_output_cov,
    output_covariance_basis,
)
from .detector import Decision, LlrAccumulator, decide, detect_anomaly, prepare_hypotheses, update  # noqa: E402
from .errors import (  # noqa: E402
    ConditioningError,
    DeviationTooLargeError,
    DomainError,
    LinearizationError,
    LlrDetectError,
    ModelFileError,
    NotPositiveDefiniteError,
    NumericalError,
    StructuralError,
)
from .model import ModelDeviation, StateSpaceModel, compose, spectral_radius, validate  # noqa: E402
from .montecarlo import ErrorRateCurve, error_rate_curve  # noqa: E402
from .observer import ObserverConfig, ObserverMode, SweepTable, augment, gain_sweep, kalman_gain  # noqa: E402
from .simulate import InitMode, SimConfig, Trajectory, simulate_outputs  # noqa: E402
from .theory import (  # noqa: E402
    LlrMoments,
    corrected_positive_probability,
    exact_llr_moments,
    misclassification_probability,
    positive_probability,
    quadratic_llr_moments,
)

__all__ = [
    "ConditioningError",
    "Decision",
    "DetectabilityMatrix",
    "DeviationTooLargeError",
    "DomainError",
    "ErrorRateCurve",
    "InitMode",
    "LinearizationError",
    "LlrAccumulator",
    "LlrDetectError",
    "LlrMoments",
    "ModelDeviation",
    "ModelFileError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "ObserverConfig",
    "ObserverMode",
    "OutputCovarianceBasis",
    "SimConfig",
    "StateSpaceModel",
    "StructuralError",
    "SweepTable",
    "Trajectory",
    "approx_output_cov",
    "augment",
    "compose",
    "corrected_positive_probability",
    "decide",
    "detect_anomaly",
    "detectability",
    "error_rate_curve",
    "exact_llr_moments",
    "exact_output_cov",
    "fisher_matrix",
    "gain_sweep",
    "kalman_gain",
    "misclassification_probability",
    "nominal_output_cov",
    "output_covariance_basis",
    "positive_probability",
    "prepare_hypotheses",
    "quadratic_llr_moments",
    "simulate_outputs",
    "spectral_radius",
    "update",
    "validate",
]
