"""Data-driven risk estimates for M-ensembles.

Naive GCV (on the full data and on the union of subsamples), the
overlap ("sub") and all-data ("full") component estimators with their
ensemble averages, and the corrected GCV built from the diagonal
components. Degenerate denominators raise instead of returning inf.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .ensemble import EnsembleFit
from .errors import DegenerateDenominatorError, EmptyOverlapError, InvalidInputError

VARIANTS = ("sub", "full")


def _check_variant(variant):
    if variant not in VARIANTS:
        raise InvalidInputError(f"variant must be 'sub' or 'full', got {variant!r}")


def gcv_full_data(fit: EnsembleFit) -> float:
    n = fit.n
    denom = (1.0 - fit.tdf / n) ** 2
    if fit.tdf >= n:
        raise DegenerateDenominatorError(f"tdf={fit.tdf} >= n={n}")
    r = fit.ensemble_residual
    return float(r @ r / n / denom)


def gcv_union(fit: EnsembleFit) -> float:
    union = np.flatnonzero(fit.membership.any(axis=1))
    size = union.size
    if fit.tdf >= size:
        raise DegenerateDenominatorError(f"tdf={fit.tdf} >= |union|={size}")
    r = fit.ensemble_residual[union]
    return float(r @ r / size / (1.0 - fit.tdf / size) ** 2)


def component_sub(fit: EnsembleFit, m: int, l: int) -> float:
    """Overlap estimate of R_{m,l}: residual inner product on I_m ∩ I_l."""
    cm, cl = fit.components[m], fit.components[l]
    common = np.intersect1d(cm.subset.indices, cl.subset.indices, assume_unique=True)
    if common.size == 0:
        raise EmptyOverlapError(f"I_{m} and I_{l} do not overlap", pair=(m, l))
    denom = (1.0 - cm.df / cm.k) * (1.0 - cl.df / cl.k)
    if denom == 0 or cm.df >= cm.k or cl.df >= cl.k:
        raise DegenerateDenominatorError(f"df >= k for pair ({m}, {l})", pair=(m, l))
    num = cm.full_residual[common] @ cl.full_residual[common] / common.size
    return float(num / denom)


def _full_denominator(df_m, df_l, k_m, k_l, overlap, n):
    return 1.0 - df_m / n - df_l / n + (df_m * df_l / (k_m * k_l)) * overlap / n


def component_full(fit: EnsembleFit, m: int, l: int) -> float:
    """All-data estimate of R_{m,l}."""
    cm, cl = fit.components[m], fit.components[l]
    n = fit.n
    overlap = np.intersect1d(cm.subset.indices, cl.subset.indices, assume_unique=True).size
    denom = _full_denominator(cm.df, cl.df, cm.k, cl.k, overlap, n)
    if denom <= 0:
        raise DegenerateDenominatorError(f"nonpositive denominator for pair ({m}, {l})", pair=(m, l))
    return float(cm.full_residual @ cl.full_residual / n / denom)


def component_matrix(fit: EnsembleFit, variant: str) -> np.ndarray:
    """All M x M component estimates at once (same formulas, vectorised)."""
    _check_variant(variant)
    R, n = fit.residuals, fit.n
    dfs, ks, overlaps = fit.dfs, fit.sizes, fit.overlaps
    if variant == "full":
        num = R.T @ R / n
        denom = 1.0 - dfs[:, None] / n - dfs[None, :] / n + np.outer(dfs / ks, dfs / ks) * overlaps / n
        bad = np.argwhere(denom <= 0)
    else:
        if np.any(overlaps == 0):
            m, l = np.argwhere(overlaps == 0)[0]
            raise EmptyOverlapError(f"I_{m} and I_{l} do not overlap", pair=(int(m), int(l)))
        masked = R * fit.membership
        num = masked.T @ masked / overlaps
        shrink = 1.0 - dfs / ks
        denom = np.outer(shrink, shrink)
        bad = np.argwhere((shrink[:, None] <= 0) | (shrink[None, :] <= 0))
    if bad.size:
        m, l = bad[0]
        raise DegenerateDenominatorError(
            f"degenerate {variant} denominator for pair ({m}, {l})", pair=(int(m), int(l))
        )
    return num / denom


def _diagonal(fit: EnsembleFit, variant: str) -> np.ndarray:
    # O(M) path used by CGCV: only R_{m,m} is needed.
    _check_variant(variant)
    n = fit.n
    out = np.empty(fit.M)
    for m, c in enumerate(fit.components):
        r = c.full_residual
        if variant == "full":
            denom = _full_denominator(c.df, c.df, c.k, c.k, c.k, n)
            num = r @ r / n
        else:
            shrink = 1.0 - c.df / c.k
            denom = shrink * shrink
            rs = r[c.subset.indices]
            num = rs @ rs / c.k
            if shrink <= 0:
                denom = 0.0
        if denom <= 0:
            raise DegenerateDenominatorError(f"degenerate {variant} denominator for component {m}",
                                             pair=(m, m))
        out[m] = num / denom
    return out


def intermediate_estimator(fit: EnsembleFit, variant: str) -> float:
    """(1/M^2) sum over all pairs of the component estimates."""
    return float(component_matrix(fit, variant).mean())


def cgcv_correction(fit: EnsembleFit, variant: str, diagonal=None) -> float:
    n, M, tdf = fit.n, fit.M, fit.tdf
    if tdf >= n:
        raise DegenerateDenominatorError(f"tdf={tdf} >= n={n}")
    if diagonal is None:
        diagonal = _diagonal(fit, variant)
    ratio = (tdf / n) ** 2 / (1.0 - tdf / n) ** 2
    return float(ratio * np.mean((n / fit.sizes - 1.0) * diagonal) / M)


def cgcv(fit: EnsembleFit, variant: str = "full") -> float:
    """Corrected GCV: ensemble GCV minus a correction that is linear in M."""
    return gcv_full_data(fit) - cgcv_correction(fit, variant)


@dataclass
class RiskReport:
    gcv_full_data: float
    gcv_union: float
    r_sub: float | None
    r_full: float | None
    cgcv_sub: float
    cgcv_full: float
    correction_sub: float
    correction_full: float
    tdf: float
    M: int
    component_matrix_sub: np.ndarray | None = None
    component_matrix_full: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("component_matrix_sub", "component_matrix_full"):
            if out[key] is not None:
                out[key] = np.asarray(out[key]).tolist()
        return out


def risk_report(fit: EnsembleFit, intermediates: bool = True) -> RiskReport:
    """Every estimator on one fitted ensemble, sharing the component matrices.

    With ``intermediates=False`` only the O(M) diagonal terms are formed and
    the pairwise estimates are left as None. Sub-variant quantities that hit
    an empty overlap or a degenerate denominator are reported as NaN.
    """
    gcv = gcv_full_data(fit)
    union = gcv_union(fit)
    mats = {}
    diags = {}
    for variant in VARIANTS:
        try:
            if intermediates:
                mats[variant] = component_matrix(fit, variant)
                diags[variant] = np.diag(mats[variant]).copy()
            else:
                diags[variant] = _diagonal(fit, variant)
        except (EmptyOverlapError, DegenerateDenominatorError):
            if variant == "full":
                raise
            mats[variant] = None
            diags[variant] = None

    def corr(variant):
        if diags[variant] is None:
            return float("nan")
        return cgcv_correction(fit, variant, diags[variant])

    c_sub, c_full = corr("sub"), corr("full")
    mean = lambda a: None if a is None else float(a.mean())  # noqa: E731
    return RiskReport(
        gcv_full_data=gcv,
        gcv_union=union,
        r_sub=mean(mats.get("sub")) if intermediates else None,
        r_full=mean(mats.get("full")) if intermediates else None,
        cgcv_sub=gcv - c_sub,
        cgcv_full=gcv - c_full,
        correction_sub=c_sub,
        correction_full=c_full,
        tdf=fit.tdf,
        M=fit.M,
        component_matrix_sub=mats.get("sub"),
        component_matrix_full=mats.get("full"),
    )
