"""Penalized least-squares fits on a single subsample.

Every estimator minimises

    (1 / (2k)) * ||y - X b||^2 + g(b)

with g one of ridge (lam/2 ||b||^2), lasso (lam ||b||_1) or elastic net
(lam1 ||b||_1 + lam2/2 ||b||^2).  All penalty values refer to this scaling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .errors import ConvergenceError, InvalidInputError, NonGenericPointError

CD_TOL = 1e-8
CD_MAX_ITER = 100_000
ACTIVE_THRESHOLD = 1e-10


class PenaltyKind(str, enum.Enum):
    RIDGE = "ridge"
    RIDGELESS = "ridgeless"
    LASSO = "lasso"
    ELASTIC_NET = "elastic_net"


@dataclass(frozen=True)
class PenaltyConfig:
    """Which penalty governs a component fit.

    ``lam`` is the ridge or lasso level (the l1 level for elastic net);
    ``lam2`` is the elastic-net l2 level. ``math.inf`` is allowed for the
    main level and yields the null predictor.
    """

    kind: PenaltyKind
    lam: float = 0.0
    lam2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        lam, lam2 = float(self.lam), float(self.lam2)
        if math.isnan(lam) or lam < 0:
            raise InvalidInputError(f"penalty level must be >= 0, got {self.lam}")
        if self.kind is PenaltyKind.RIDGELESS and lam != 0:
            raise InvalidInputError("ridgeless penalty has lam = 0")
        if self.kind is PenaltyKind.ELASTIC_NET:
            if not (lam2 > 0 and math.isfinite(lam2)):
                raise InvalidInputError(f"elastic net needs finite lam2 > 0, got {self.lam2}")
        elif lam2 != 0:
            raise InvalidInputError("lam2 is only meaningful for elastic net")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lam2", lam2)

    @classmethod
    def ridge(cls, lam):
        return cls(PenaltyKind.RIDGE, lam)

    @classmethod
    def ridgeless(cls):
        return cls(PenaltyKind.RIDGELESS, 0.0)

    @classmethod
    def lasso(cls, lam):
        return cls(PenaltyKind.LASSO, lam)

    @classmethod
    def elastic_net(cls, lam1, lam2):
        return cls(PenaltyKind.ELASTIC_NET, lam1, lam2)

    @classmethod
    def parse(cls, text: str) -> "PenaltyConfig":
        """Parse ``ridge:1``, ``ridgeless``, ``lasso:0.05`` or ``elastic_net:0.1,0.01``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip().lower().replace("-", "_")
        try:
            values = [float(v) for v in rest.split(",")] if rest else []
            if kind == "ridgeless" and not values:
                return cls.ridgeless()
            if kind in ("ridge", "lasso") and len(values) == 1:
                return cls(PenaltyKind(kind), values[0])
            if kind == "elastic_net" and len(values) == 2:
                return cls.elastic_net(*values)
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse penalty {text!r}: {exc}") from None
        raise InvalidInputError(f"cannot parse penalty {text!r}")

    @property
    def is_ridge_family(self) -> bool:
        return self.kind in (PenaltyKind.RIDGE, PenaltyKind.RIDGELESS)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "lambda": self.lam}
        if self.kind is PenaltyKind.ELASTIC_NET:
            out = {"kind": self.kind.value, "lambda1": self.lam, "lambda2": self.lam2}
        return out


@dataclass
class FitResult:
    beta: np.ndarray
    df: float
    active_set: np.ndarray | None = None
    objective_value: float = 0.0
    kkt_residual: float = 0.0
    n_iter: int = 0
    penalty: PenaltyConfig | None = field(default=None, repr=False)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError("need k >= 1 rows and p >= 1 columns")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidInputError("non-finite entries in X or y")
    return X, y


def _check_level(lam, name="lambda"):
    lam = float(lam)
    if math.isnan(lam) or lam < 0:
        raise InvalidInputError(f"{name} must be >= 0, got {lam}")
    return lam


def _objective(X, y, beta, l1, l2):
    r = y - X @ beta
    pen = 0.0
    if l1 > 0:
        pen += l1 * np.abs(beta).sum()
    if l2 > 0:
        pen += 0.5 * l2 * beta @ beta
    return float(r @ r / (2 * X.shape[0]) + pen)


def _null_fit(X, y, penalty=None):
    p = X.shape[1]
    active = None if penalty is None or penalty.is_ridge_family else np.empty(0, dtype=np.intp)
    return FitResult(np.zeros(p), 0.0, active, float(y @ y / (2 * X.shape[0])), 0.0, 0, penalty)


# ---------------------------------------------------------------- ridge


def ridge_path(X_sub, y_sub, lambdas: Sequence[float]) -> list[FitResult]:
    """Ridge fits for several levels sharing one thin SVD of ``X_sub``."""
    X, y = _check_xy(X_sub, y_sub)
    lambdas = [_check_level(lam) for lam in lambdas]
    k, p = X.shape
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    Uty = U.T @ y
    Xty = X.T @ y / k
    cutoff = s.max(initial=0.0) * max(k, p) * np.finfo(float).eps

    out = []
    for lam in lambdas:
        if math.isinf(lam):
            penalty = PenaltyConfig.ridge(lam)
            out.append(_null_fit(X, y, penalty))
            continue
        if lam == 0:
            keep = s > cutoff
            shrink = np.zeros_like(s)
            shrink[keep] = 1.0 / s[keep]
            df = float(keep.sum())
            penalty = PenaltyConfig.ridgeless()
        else:
            s2 = s * s
            shrink = s / (s2 + k * lam)
            df = float(np.sum(s2 / (s2 + k * lam)))
            penalty = PenaltyConfig.ridge(lam)
        beta = Vt.T @ (shrink * Uty)
        grad = X.T @ (X @ beta) / k + lam * beta - Xty
        out.append(
            FitResult(
                beta=beta,
                df=df,
                objective_value=_objective(X, y, beta, 0.0, lam),
                kkt_residual=float(np.max(np.abs(grad))),
                penalty=penalty,
            )
        )
    return out


def fit_ridge(X_sub, y_sub, lam: float) -> FitResult:
    """Ridge on one subsample; ``lam = 0`` returns the minimum-norm interpolator.

    df is tr[X (X'X + k lam I)^+ X'], computed from the singular values.
    """
    return ridge_path(X_sub, y_sub, [lam])[0]


# ---------------------------------------------------- coordinate descent


@njit(cache=True, nogil=True)
def _cd_gram(G, c, beta, l1, l2, tol, max_iter):
    # Cyclic coordinate descent on 0.5 b'Gb - c'b + l1|b|_1 + l2/2 |b|^2.
    p = beta.shape[0]
    q = c - G @ beta  # negative smooth-loss gradient, without the l2 term
    for it in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(p):
            gjj = G[j, j]
            denom = gjj + l2
            old = beta[j]
            if denom <= 0.0:
                new = 0.0
            else:
                z = q[j] + gjj * old
                if z > l1:
                    new = (z - l1) / denom
                elif z < -l1:
                    new = (z + l1) / denom
                else:
                    new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for i in range(p):
                    q[i] -= delta * G[i, j]
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if max_change < tol:
            return it, True
    return max_iter, False


def _kkt_residual(G, c, beta, l1, l2):
    q = c - G @ beta - l2 * beta
    active = np.abs(beta) > 0
    viol = np.where(active, np.abs(q - l1 * np.sign(beta)), np.maximum(np.abs(q) - l1, 0.0))
    return float(viol.max(initial=0.0))


def _polish(G, c, beta, l1, l2):
    """Re-solve exactly on the active set with fixed signs; None if that breaks optimality."""
    S = np.flatnonzero(np.abs(beta) > ACTIVE_THRESHOLD)
    if S.size == 0:
        return None
    signs = np.sign(beta[S])
    A = G[np.ix_(S, S)] + l2 * np.eye(S.size)
    try:
        if np.linalg.cond(A) > 1e12:
            return None
        bS = np.linalg.solve(A, c[S] - l1 * signs)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(bS) != signs):
        return None
    polished = np.zeros_like(beta)
    polished[S] = bS
    if _kkt_residual(G, c, polished, l1, l2) > _kkt_residual(G, c, beta, l1, l2):
        return None
    return polished


def _enet_df(G, active, l2):
    if active.size == 0:
        return 0.0
    GS = G[np.ix_(active, active)]
    if l2 == 0:
        # lasso: |S| (the trace formula is the rank of X_S, equal to |S| generically)
        return float(active.size)
    return float(np.trace(np.linalg.solve(GS + l2 * np.eye(active.size), GS)))


def _cd_path(X, y, l1s, l2, kind, tol, max_iter, beta_init=None):
    k, p = X.shape
    G = X.T @ X / k
    c = X.T @ y / k
    order = np.argsort(-np.asarray(l1s), kind="stable")
    beta = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=float, copy=True)
    out: list[FitResult | None] = [None] * len(l1s)
    for idx in order:
        l1 = l1s[idx]
        penalty = PenaltyConfig(kind, l1, l2)
        if math.isinf(l1) or (np.max(np.abs(c), initial=0.0) <= l1):
            out[idx] = _null_fit(X, y, penalty)
            beta = np.zeros(p)
            continue
        n_iter, ok = _cd_gram(G, c, beta, l1, l2, tol, max_iter)
        if not ok:
            raise ConvergenceError(
                f"coordinate descent did not converge in {max_iter} sweeps (lambda={l1})",
                iterate=beta.copy(),
            )
        polished = _polish(G, c, beta, l1, l2)
        if polished is not None:
            beta = polished
        beta[np.abs(beta) <= ACTIVE_THRESHOLD] = 0.0
        active = np.flatnonzero(beta)
        out[idx] = FitResult(
            beta=beta.copy(),
            df=_enet_df(G, active, l2),
            active_set=active,
            objective_value=_objective(X, y, beta, l1, l2),
            kkt_residual=_kkt_residual(G, c, beta, l1, l2),
            n_iter=n_iter,
            penalty=penalty,
        )
    return out


def lasso_path(X_sub, y_sub, lambdas, tol=CD_TOL, max_iter=CD_MAX_ITER) -> list[FitResult]:
    """Lasso fits over a grid, solved from the largest level down with warm starts."""
    X, y = _check_xy(X_sub, y_sub)
    lambdas = [_check_level(lam) for lam in lambdas]
    return _cd_path(X, y, lambdas, 0.0, PenaltyKind.LASSO, tol, max_iter)


def elastic_net_path(X_sub, y_sub, lambda1s, lambda2, tol=CD_TOL, max_iter=CD_MAX_ITER):
    X, y = _check_xy(X_sub, y_sub)
    lambda1s = [_check_level(lam, "lambda1") for lam in lambda1s]
    lambda2 = float(lambda2)
    if not (lambda2 > 0 and math.isfinite(lambda2)):
        raise InvalidInputError(f"elastic net needs finite lambda2 > 0, got {lambda2}")
    return _cd_path(X, y, lambda1s, lambda2, PenaltyKind.ELASTIC_NET, tol, max_iter)


def fit_lasso(X_sub, y_sub, lam, tol=CD_TOL, max_iter=CD_MAX_ITER, beta_init=None) -> FitResult:
    """Lasso by cyclic coordinate descent; df is the size of the active set."""
    X, y = _check_xy(X_sub, y_sub)
    lam = _check_level(lam)
    return _cd_path(X, y, [lam], 0.0, PenaltyKind.LASSO, tol, max_iter, beta_init)[0]


def fit_elastic_net(X_sub, y_sub, lambda1, lambda2, tol=CD_TOL, max_iter=CD_MAX_ITER,
                    beta_init=None) -> FitResult:
    """Elastic net by coordinate descent.

    df = tr[X_S (X_S'X_S + k lambda2 I)^{-1} X_S'] over the active columns S.
    """
    X, y = _check_xy(X_sub, y_sub)
    lambda1 = _check_level(lambda1, "lambda1")
    lambda2 = float(lambda2)
    if not (lambda2 > 0 and math.isfinite(lambda2)):
        raise InvalidInputError(f"elastic net needs finite lambda2 > 0, got {lambda2}")
    return _cd_path(X, y, [lambda1], lambda2, PenaltyKind.ELASTIC_NET, tol, max_iter, beta_init)[0]


def fit(X_sub, y_sub, penalty: PenaltyConfig, **kwargs) -> FitResult:
    if penalty.kind is PenaltyKind.RIDGELESS:
        return fit_ridge(X_sub, y_sub, 0.0)
    if penalty.kind is PenaltyKind.RIDGE:
        return fit_ridge(X_sub, y_sub, penalty.lam)
    if penalty.kind is PenaltyKind.LASSO:
        return fit_lasso(X_sub, y_sub, penalty.lam, **kwargs)
    return fit_elastic_net(X_sub, y_sub, penalty.lam, penalty.lam2, **kwargs)


def fit_path(X_sub, y_sub, kind, lambdas, lam2=0.0, **kwargs) -> list[FitResult]:
    """Fits for a grid of main penalty levels, sharing work across the grid."""
    kind = PenaltyKind(kind)
    if kind in (PenaltyKind.RIDGE, PenaltyKind.RIDGELESS):
        return ridge_path(X_sub, y_sub, lambdas)
    if kind is PenaltyKind.LASSO:
        return lasso_path(X_sub, y_sub, lambdas, **kwargs)
    return elastic_net_path(X_sub, y_sub, lambdas, lam2, **kwargs)


def df_finite_difference_oracle(fitter: Callable[[np.ndarray, np.ndarray], FitResult],
                                X_sub, y_sub, eps: float = 1e-6) -> float:
    """Trace of the Jacobian of y -> X beta(y), by forward differences.

    Raises NonGenericPointError if a perturbation flips the active set or
    the sign pattern.
    """
    X, y = _check_xy(X_sub, y_sub)
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    base = fitter(X, y)
    base_pred = X @ base.beta
    base_signs = None
    if base.active_set is not None:
        base_signs = np.sign(base.beta[base.active_set])

    total = 0.0
    for i in range(X.shape[0]):
        y_pert = y.copy()
        y_pert[i] += eps
        res = fitter(X, y_pert)
        if base.active_set is not None:
            if not np.array_equal(res.active_set, base.active_set) or not np.array_equal(
                np.sign(res.beta[res.active_set]), base_signs
            ):
                raise NonGenericPointError(f"active set changed when perturbing y[{i}]")
        total += (X[i] @ res.beta - base_pred[i]) / eps
    return float(total)
