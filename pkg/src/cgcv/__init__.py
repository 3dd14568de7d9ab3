"""Risk estimation for subsample ensembles of penalized least-squares fits."""

from .asymptotics import (
    DeterministicEquivalents,
    SpectralDistribution,
    asymptotic_gcv_gap,
    deterministic_equivalents,
    solve_v,
)
from .datagen import (
    GaussianLinearSpec,
    NonlinearAR1Spec,
    Spectrum,
    ar1_covariance,
    gen_gaussian_linear,
    gen_nonlinear_ar1,
)
from .ensemble import EnsembleFit, IndexSet, draw_subsamples, fit_ensemble, fit_ensemble_path
from .errors import (
    CGCVError,
    ConfigError,
    ConvergenceError,
    DegenerateDenominatorError,
    EmptyOverlapError,
    InvalidInputError,
    NonGenericPointError,
    NumericalError,
    RegimeError,
)
from .harness import ExperimentConfig, ResultRow, run_sweep, write_csv
from .oracle import LinearModelOracle, TestSet, empirical_risk, true_risk
from .risk import (
    RiskReport,
    cgcv,
    component_full,
    component_sub,
    gcv_full_data,
    gcv_union,
    intermediate_estimator,
    risk_report,
)
from .solvers import FitResult, PenaltyConfig, PenaltyKind, fit, fit_path

__version__ = "0.1.0"
