"""Synthetic designs: a sparse Gaussian linear model and a nonlinear AR(1) model."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ensemble import make_rng
from .errors import InvalidInputError
from .oracle import LinearModelOracle, TestSet

HEAVY_TAIL_DOF = 6.0


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a diagonal feature covariance.

    kind is ``evenly_spaced`` (lo..hi), ``isotropic`` or ``custom``.
    """

    kind: str = "evenly_spaced"
    lo: float = 0.1
    hi: float = 10.0
    eigenvalues: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("evenly_spaced", "isotropic", "custom"):
            raise InvalidInputError(f"unknown spectrum kind {self.kind!r}")
        if self.kind == "evenly_spaced" and not 0 < self.lo <= self.hi:
            raise InvalidInputError("evenly spaced spectrum needs 0 < lo <= hi")
        if self.kind == "custom" and (not self.eigenvalues or min(self.eigenvalues) <= 0):
            raise InvalidInputError("custom spectrum needs positive eigenvalues")

    def values(self, p: int) -> np.ndarray:
        if self.kind == "isotropic":
            return np.ones(p)
        if self.kind == "custom":
            if len(self.eigenvalues) != p:
                raise InvalidInputError(f"custom spectrum has {len(self.eigenvalues)} values, p={p}")
            return np.asarray(self.eigenvalues, dtype=float)
        if p == 1:
            return np.array([self.lo])
        return self.lo + np.arange(p) * ((self.hi - self.lo) / (p - 1))


@dataclass(frozen=True)
class GaussianLinearSpec:
    n: int
    p: int
    snr: float = 1.0
    sigma2: float = 1.0
    spectrum: Spectrum = field(default_factory=Spectrum)
    sparsity_tail: int = 100

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise InvalidInputError("n and p must be positive")
        if not (self.snr > 0 and self.sigma2 > 0):
            raise InvalidInputError("snr and sigma2 must be positive")
        if not 0 <= self.sparsity_tail < self.p:
            raise InvalidInputError(f"sparsity_tail must lie in [0, p), got {self.sparsity_tail}")


@dataclass(frozen=True)
class NonlinearAR1Spec:
    n: int
    p: int
    rho: float = 0.25
    feature_law: str = "gaussian"
    noise_sigma2: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise InvalidInputError("n and p must be positive")
        if not -1 < self.rho < 1:
            raise InvalidInputError("rho must lie in (-1, 1)")
        if self.feature_law not in ("gaussian", "heavy_tail"):
            raise InvalidInputError(f"unknown feature law {self.feature_law!r}")
        if not self.noise_sigma2 > 0:
            raise InvalidInputError("noise_sigma2 must be positive")


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """Toeplitz matrix with entries rho^|i-j|."""
    if not -1 < rho < 1:
        raise InvalidInputError(f"|rho| must be < 1, got {rho}")
    lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.power(float(rho), lags)


@lru_cache(maxsize=8)
def _ar1_eig(p: int, rho: float):
    w, V = np.linalg.eigh(ar1_covariance(p, rho))
    w = np.clip(w, 0.0, None)
    sqrt = (V * np.sqrt(w)) @ V.T
    for a in (w, V, sqrt):
        a.setflags(write=False)
    return w, V, sqrt


def top_eigvec_average(w: np.ndarray, V: np.ndarray, count: int = 5) -> np.ndarray:
    """Unit-norm average of the leading eigenvectors.

    Each eigenvector is signed so its first nonzero entry is positive;
    equal eigenvalues are ordered by the coordinate where the vector peaks.
    """
    peak = np.argmax(np.abs(V), axis=0)
    order = np.lexsort((peak, -w))[:count]
    vecs = V[:, order].copy()
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] *= -1
    avg = vecs.mean(axis=1)
    return avg / np.linalg.norm(avg)


def _standard_features(rng, n, p, law):
    if law == "gaussian":
        return rng.standard_normal((n, p))
    nu = HEAVY_TAIL_DOF
    return rng.standard_t(nu, size=(n, p)) / math.sqrt(nu / (nu - 2))


def gen_gaussian_linear(spec: GaussianLinearSpec, seed: int, n_test: int | None = None):
    """Draw (Dataset, LinearModelOracle, TestSet) from the sparse Gaussian linear model."""
    n_test = spec.n if n_test is None else int(n_test)
    diag = spec.spectrum.values(spec.p)
    b0 = np.zeros(spec.p)
    n_dense = spec.p - spec.sparsity_tail
    b0[:n_dense] = make_rng(seed, 0).standard_normal(n_dense)
    energy = b0 @ (diag * b0)
    if energy <= 0:
        raise InvalidInputError("degenerate coefficient draw")
    beta0 = b0 * math.sqrt(spec.snr * spec.sigma2 / energy)
    oracle = LinearModelOracle(np.diag(diag), beta0, spec.sigma2)
    scale = np.sqrt(diag)
    sd = math.sqrt(spec.sigma2)

    def draw(rng, size):
        X = rng.standard_normal((size, spec.p)) * scale
        return X, X @ beta0 + sd * rng.standard_normal(size)

    X, y = draw(make_rng(seed, 1), spec.n)
    X_test, y_test = draw(make_rng(seed, 2), n_test)
    return Dataset(X, y), oracle, TestSet(X_test, y_test)


def nonlinear_ar1_oracle(spec: NonlinearAR1Spec) -> LinearModelOracle:
    """Best linear projection of the nonlinear model; sigma2 is the nonlinear residual energy."""
    w, V, _ = _ar1_eig(spec.p, float(spec.rho))
    Sigma = ar1_covariance(spec.p, spec.rho)
    beta0 = top_eigvec_average(w, V)
    excess_kurtosis = 0.0
    if spec.feature_law == "heavy_tail":
        excess_kurtosis = 6.0 / (HEAVY_TAIL_DOF - 4.0)
    p = spec.p
    # x = Sigma^{1/2} z, so ||x||^2 = z' Sigma z with unit diagonal.
    var_quad = (2.0 * np.sum(Sigma * Sigma) + excess_kurtosis * p) / p**2
    return LinearModelOracle(Sigma, beta0, var_quad + spec.noise_sigma2)


def gen_nonlinear_ar1(spec: NonlinearAR1Spec, seed: int, n_test: int | None = None):
    """Draw (Dataset, TestSet) from y = x'beta0 + (||x||^2/p - 1) + noise."""
    n_test = spec.n if n_test is None else int(n_test)
    w, V, sqrt = _ar1_eig(spec.p, float(spec.rho))
    beta0 = top_eigvec_average(w, V)
    sd = math.sqrt(spec.noise_sigma2)

    def draw(rng, size):
        X = _standard_features(rng, size, spec.p, spec.feature_law) @ sqrt
        y = X @ beta0 + (np.einsum("ij,ij->i", X, X) / spec.p - 1.0) + sd * rng.standard_normal(size)
        return X, y

    X, y = draw(make_rng(seed, 1), spec.n)
    X_test, y_test = draw(make_rng(seed, 2), n_test)
    return Dataset(X, y), TestSet(X_test, y_test)


def save_dataset_csv(data: Dataset, path) -> None:
    p = data.p
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x_{j}" for j in range(p)] + ["y"])
        for row, target in zip(data.X, data.y):
            writer.writerow([format(v, ".17g") for v in row] + [format(target, ".17g")])


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1].strip() != "y":
            raise InvalidInputError(f"{path}: expected header x_0,...,x_(p-1),y")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    arr = np.array(rows)
    if arr.shape[1] != len(header):
        raise InvalidInputError(f"{path}: ragged rows")
    return Dataset(arr[:, :-1], arr[:, -1])


def empirical_linearized_snr(data: Dataset, oracle: LinearModelOracle) -> float:
    """beta0' Sigma beta0 over the sample variance of y - x'beta0."""
    resid = data.y - data.X @ oracle.beta0
    return float(oracle.beta0 @ oracle.Sigma @ oracle.beta0 / resid.var())

