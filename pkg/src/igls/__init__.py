"""Regression with stationary serially correlated errors.

Time- and frequency-domain IGLS, Levinson-Durbin Toeplitz machinery, the
spectral sandwich covariance and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .asymptotics import McStudyConfig, MethodSpec, cv_matrix_limit, cv_spectral, mc_study, normality_report
from .design import Design, SpectralMeasure, builtin_design, grenander_diagnose, sample_rho, scaling
from .estimators import RegressionSample, fgls_ar, gls_frequency, gls_time, ols, periodograms
from .processes import (
    AcvfSeq,
    ArModelSpec,
    LinearFilterSpec,
    SpectralDensity,
    acvf_from_ar,
    acvf_from_filter,
    acvf_from_sdf,
    check_assumptions,
    sdf_from_filter,
    simulate,
)
from .toeplitz import ToeplitzCov, apply_inverse, inverse_norms, levinson, materialize

__all__ = [
    "AcvfSeq", "ArModelSpec", "Design", "LinearFilterSpec", "McStudyConfig", "MethodSpec",
    "RegressionSample", "SpectralDensity", "SpectralMeasure", "ToeplitzCov",
    "acvf_from_ar", "acvf_from_filter", "acvf_from_sdf", "apply_inverse", "builtin_design",
    "check_assumptions", "cv_matrix_limit", "cv_spectral", "fgls_ar", "gls_frequency", "gls_time",
    "grenander_diagnose", "inverse_norms", "levinson", "materialize", "mc_study",
    "normality_report", "ols", "periodograms", "sample_rho", "scaling", "sdf_from_filter", "simulate",
]
