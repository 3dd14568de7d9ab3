"""Proportional-asymptotics limits for ridge ensembles.

Everything is parameterised by the fixed point v solving

    1/v = lam + theta * E_H[ r / (1 + v r) ]

for the spectral distribution H of the feature covariance, with
theta = p/k.  ``phi = p/n`` and ``psi = p/k`` throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError, NumericalError, RegimeError

MAX_EXPANSIONS = 1000


@dataclass(frozen=True)
class SpectralDistribution:
    """Discrete distribution of covariance eigenvalues (atoms and weights)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if r.shape != w.shape or r.size == 0:
            raise InvalidInputError("atoms and weights must be nonempty and of equal length")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise InvalidInputError("eigenvalues must be positive and finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
        object.__setattr__(self, "atoms", r)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, r: float = 1.0) -> "SpectralDistribution":
        return cls(np.array([r]), np.array([1.0]))

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "SpectralDistribution":
        vals, counts = np.unique(np.asarray(eigenvalues, dtype=float), return_counts=True)
        return cls(vals, counts / counts.sum())

    @classmethod
    def from_csv(cls, path) -> "SpectralDistribution":
        """Read ``eigenvalue,weight`` rows; a header line is optional."""
        atoms, weights = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or not "".join(row).strip():
                    continue
                try:
                    r, w = (float(x) for x in row)
                except ValueError:
                    if lineno == 1:
                        continue
                    raise InvalidInputError(f"{path}:{lineno}: expected 'eigenvalue,weight'") from None
                atoms.append(r)
                weights.append(w)
        return cls(np.array(atoms), np.array(weights))

    def mean(self, f) -> float:
        return float(np.dot(self.weights, f(self.atoms)))


@dataclass(frozen=True)
class FixedPointSolution:
    v: float
    lam: float
    theta: float
    residual: float


def fixed_point_residual(v: float, lam: float, theta: float, H: SpectralDistribution) -> float:
    return 1.0 / v - lam - theta * H.mean(lambda r: r / (1.0 + v * r))


def solve_v(lam: float, theta: float, H: SpectralDistribution) -> FixedPointSolution:
    """Nonnegative root of the fixed-point equation, by bisection.

    The residual is strictly decreasing in v, so bisection on a bracket
    grown geometrically always converges. Returns v = inf when lam = 0
    and theta <= 1, and v = 0 when lam = inf.
    """
    lam, theta = float(lam), float(theta)
    if math.isnan(lam) or lam < 0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    if not theta > 0:
        raise InvalidInputError(f"theta must be > 0, got {theta}")
    if math.isinf(lam):
        return FixedPointSolution(0.0, lam, theta, 0.0)
    if lam == 0 and theta <= 1:
        return FixedPointSolution(math.inf, lam, theta, 0.0)

    g = lambda v: fixed_point_residual(v, lam, theta, H)  # noqa: E731
    hi = 1.0
    for _ in range(MAX_EXPANSIONS):
        if g(hi) < 0:
            break
        hi *= 2.0
    else:
        raise NumericalError("no sign change while growing the upper bracket")
    lo = hi
    for _ in range(MAX_EXPANSIONS):
        lo *= 0.5
        if g(lo) > 0:
            break
    else:
        raise NumericalError("no sign change while shrinking the lower bracket")

    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm == 0:
            lo = hi = mid
            break
        if gm > 0:
            lo = mid
        else:
            hi = mid
    v = lo if abs(g(lo)) <= abs(g(hi)) else hi
    return FixedPointSolution(v, lam, theta, abs(g(v)))


def quadratic_from_oracle(Sigma, beta0) -> Callable[[float], float]:
    """v -> beta0' (v Sigma + I)^{-1} Sigma (v Sigma + I)^{-1} beta0."""
    w, Q = np.linalg.eigh(np.asarray(Sigma, dtype=float))
    a2 = (Q.T @ np.asarray(beta0, dtype=float)) ** 2
    return lambda v: float(np.sum(a2 * w / (1.0 + v * w) ** 2))


def isotropic_quadratic(H: SpectralDistribution, energy: float) -> Callable[[float], float]:
    """Approximation of the quadratic above when only ||beta0||^2 and the spectrum are known."""
    return lambda v: float(energy * H.mean(lambda r: r / (1.0 + v * r) ** 2))


@dataclass(frozen=True)
class DeterministicEquivalents:
    lam: float
    phi: float
    psi: float
    v: float
    tv_diag: float
    tv_offdiag: float
    tc: float
    fnl_energy: float
    sR_diag: float
    sR_offdiag: float
    sD_sub: float
    sD_full_diag: float
    sD_full_offdiag: float

    @property
    def lam_v(self) -> float:
        return 1.0 if math.isinf(self.lam) else self.lam * self.v

    @property
    def d_p_diag(self) -> float:
        return self.sD_full_diag

    @property
    def d_p_offdiag(self) -> float:
        return self.sD_full_offdiag

    @property
    def sN_sub_diag(self) -> float:
        return self.sD_sub * self.sR_diag

    @property
    def sN_sub_offdiag(self) -> float:
        return self.sD_sub * self.sR_offdiag

    @property
    def sN_full_diag(self) -> float:
        return self.sD_full_diag * self.sR_diag

    @property
    def sN_full_offdiag(self) -> float:
        return self.sD_full_offdiag * self.sR_offdiag

    @property
    def tdf_over_n(self) -> float:
        return self.phi / self.psi * (1.0 - self.lam_v)

    def ensemble_risk(self, M: int) -> float:
        """Limit of the M-ensemble risk: diagonal terms weigh 1/M, the rest (M-1)/M."""
        return self.sR_diag / M + (M - 1) / M * self.sR_offdiag

    def ensemble_gcv(self, M: int) -> float:
        """Limit of the naive full-data GCV for the M-ensemble."""
        num = (self.sN_full_diag + (M - 1) * self.sN_full_offdiag) / M
        return num / self.sD_full_offdiag


def deterministic_equivalents(lam, phi, psi, H: SpectralDistribution,
                              beta0_quadratic: Callable[[float], float],
                              fnl_energy: float) -> DeterministicEquivalents:
    lam, phi, psi = float(lam), float(phi), float(psi)
    if not (phi > 0 and psi >= phi):
        raise InvalidInputError(f"need psi >= phi > 0, got phi={phi}, psi={psi}")
    if lam == 0 and psi == 1:
        raise RegimeError("risk diverges for the ridgeless fit at psi = 1")
    sol = solve_v(lam, psi, H)
    v = sol.v
    if math.isinf(v):
        raise RegimeError(f"fixed point is infinite at lambda={lam}, psi={psi}")

    second = H.mean(lambda r: r**2 / (1.0 + v * r) ** 2)

    def tv(varphi):
        if v == 0:
            return 0.0
        denom = v**-2 - varphi * second
        if denom <= 0:
            raise RegimeError(f"tv denominator {denom} <= 0 at lambda={lam}, psi={psi}")
        return varphi * second / denom

    tv_diag, tv_off = tv(psi), tv(phi)
    tc = float(beta0_quadratic(v))
    lam_v = 1.0 if math.isinf(lam) else lam * v
    shrink = (psi - phi) / psi
    return DeterministicEquivalents(
        lam=lam,
        phi=phi,
        psi=psi,
        v=v,
        tv_diag=tv_diag,
        tv_offdiag=tv_off,
        tc=tc,
        fnl_energy=float(fnl_energy),
        sR_diag=(fnl_energy + tc) * (1.0 + tv_diag),
        sR_offdiag=(fnl_energy + tc) * (1.0 + tv_off),
        sD_sub=lam_v**2,
        sD_full_diag=shrink + phi / psi * lam_v**2,
        sD_full_offdiag=(shrink + phi / psi * lam_v) ** 2,
    )


def asymptotic_gcv_gap(lam, phi, psi, M: int, equivalents: DeterministicEquivalents) -> float:
    """Limit of R_M minus the naive GCV (negative: GCV over-estimates).

    ``lam``, ``phi``, ``psi`` must match the ones ``equivalents`` was built with.
    """
    eq = equivalents
    if not np.allclose([lam, phi, psi], [eq.lam, eq.phi, eq.psi], rtol=1e-12, atol=0):
        raise InvalidInputError("parameters do not match the supplied equivalents")
    if M < 1:
        raise InvalidInputError("M must be >= 1")
    ratio = eq.sD_full_diag / eq.sD_full_offdiag
    return (1.0 - ratio) * (1.0 + eq.tv_diag) * (eq.fnl_energy + eq.tc) / M
