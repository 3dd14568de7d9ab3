"""Ground-truth conditional prediction risk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleFit
from .errors import InvalidInputError


@dataclass
class LinearModelOracle:
    """Population law summary: feature covariance, best linear projection, residual energy."""

    Sigma: np.ndarray
    beta0: np.ndarray
    sigma2: float

    def __post_init__(self):
        self.Sigma = np.asarray(self.Sigma, dtype=float)
        self.beta0 = np.asarray(self.beta0, dtype=float)
        p = self.beta0.shape[0]
        if self.Sigma.shape != (p, p):
            raise InvalidInputError(f"Sigma shape {self.Sigma.shape} does not match p={p}")
        if not np.allclose(self.Sigma, self.Sigma.T):
            raise InvalidInputError("Sigma must be symmetric")
        if not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")

    @property
    def p(self) -> int:
        return self.beta0.shape[0]

    @property
    def null_risk(self) -> float:
        return float(self.sigma2 + self.beta0 @ self.Sigma @ self.beta0)


@dataclass
class TestSet:
    X_test: np.ndarray
    y_test: np.ndarray

    __test__ = False  # keep pytest from collecting this class


def risk_component(oracle: LinearModelOracle, beta_m, beta_l) -> float:
    """(beta_m - beta0)' Sigma (beta_l - beta0) + sigma^2."""
    dm = np.asarray(beta_m, dtype=float) - oracle.beta0
    dl = np.asarray(beta_l, dtype=float) - oracle.beta0
    if dm.shape != (oracle.p,) or dl.shape != (oracle.p,):
        raise InvalidInputError("coefficient dimension does not match the oracle")
    return float(dm @ oracle.Sigma @ dl + oracle.sigma2)


def true_risk(oracle: LinearModelOracle, fit: EnsembleFit) -> float:
    """Conditional risk of the ensemble average, via the quadratic form on its coefficients."""
    return risk_component(oracle, fit.ensemble_beta, fit.ensemble_beta)


def risk_component_matrix(oracle: LinearModelOracle, fit: EnsembleFit) -> np.ndarray:
    D = np.column_stack([c.beta for c in fit.components]) - oracle.beta0[:, None]
    return D.T @ oracle.Sigma @ D + oracle.sigma2


def empirical_risk(test: TestSet, fit: EnsembleFit) -> float:
    """Mean squared prediction error of the ensemble on a held-out set."""
    y = np.asarray(test.y_test, dtype=float)
    if y.size < 1:
        raise InvalidInputError("empty test set")
    r = y - np.asarray(test.X_test) @ fit.ensemble_beta
    return float(r @ r / y.size)
