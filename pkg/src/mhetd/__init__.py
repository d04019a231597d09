"""Robust moving-horizon state estimation for SISO ARMAX processes
with Student-t noise: windowed and recursive robust estimators,
least-squares/Kalman/particle baselines, closed-form variance and
outlier-response analysis, and a seeded Monte Carlo harness.
"""
from ._kernels import BACKEND as kernel_backend
from .analysis import (OutlierTrace, VarianceReport, outlier_expectation,
                       variance_gaussian, variance_yhat)
from .armax import (ArmaxModel, Polynomial, StateSpaceRealization, Trajectory,
                    build_state_space, propagate_s, s_sequence, simulate)
from .errors import (ConfigError, DegenerateWeights, DegreeMismatch,
                     DimensionMismatch, InsufficientData, MhetdError,
                     NoConvergence, NonFiniteVariance, NotWarmedUp,
                     PhiSingular, SingularInformation, UnstableModel)
from .estimators import (ArmaxFilter, FilterGains, KalmanFilter, MheTdFilter,
                         MwlseFilter, batch_from_history, batch_mhe_td,
                         compute_gains)
from .mle import MleResult, solve_windowed_mle
from .noise import NoiseMoments, TDistribution, closed_form_moments, rho_moments
from .particle import ParticleCloud, make_cloud, particle_filter_step

__version__ = "0.1.0"

__all__ = [
    "ArmaxFilter", "ArmaxModel", "ConfigError", "DegenerateWeights",
    "DegreeMismatch", "DimensionMismatch", "FilterGains", "InsufficientData",
    "KalmanFilter", "MheTdFilter", "MhetdError", "MleResult", "MwlseFilter",
    "NoConvergence", "NoiseMoments", "NonFiniteVariance", "NotWarmedUp",
    "OutlierTrace", "ParticleCloud", "PhiSingular", "Polynomial",
    "SingularInformation", "StateSpaceRealization", "TDistribution",
    "Trajectory", "UnstableModel", "VarianceReport", "batch_from_history",
    "batch_mhe_td", "build_state_space", "closed_form_moments",
    "compute_gains", "kernel_backend", "make_cloud", "outlier_expectation",
    "particle_filter_step", "propagate_s", "rho_moments", "s_sequence",
    "simulate", "solve_windowed_mle", "variance_gaussian", "variance_yhat",
]
