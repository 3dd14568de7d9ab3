"""Monte Carlo sweeps over (penalty level, k, M, repetition) written as CSV.

Each repetition draws one dataset; for every k the M_max subsamples are
drawn once and fitted along the whole penalty grid, and smaller ensembles
reuse the leading components.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import risk as R
from .asymptotics import SpectralDistribution, deterministic_equivalents, quadratic_from_oracle
from .datagen import (
    GaussianLinearSpec,
    NonlinearAR1Spec,
    Spectrum,
    gen_gaussian_linear,
    gen_nonlinear_ar1,
    nonlinear_ar1_oracle,
)
from .ensemble import draw_subsamples, fit_ensemble_path
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateDenominatorError,
    EmptyOverlapError,
    InvalidInputError,
    RegimeError,
)
from .oracle import empirical_risk, true_risk
from .solvers import PenaltyKind

ESTIMATORS = ("risk", "gcv", "gcv_union", "sub", "full", "cgcv_sub", "cgcv_full", "asymptotic", "tdf")
STATUSES = ("ok", "degenerate", "empty_overlap", "non_converged")
CSV_HEADER = ("rep", "lambda", "k", "M", "estimator", "value", "status")


@dataclass(frozen=True)
class PenaltyGrid:
    kind: PenaltyKind
    lambdas: tuple[float, ...]
    lambda2: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    design: GaussianLinearSpec | NonlinearAR1Spec
    penalty: PenaltyGrid
    k_grid: tuple[int, ...]
    M_grid: tuple[int, ...]
    reps: int = 1
    seed: int = 0
    estimators: tuple[str, ...] = ("risk", "gcv", "cgcv_full")
    n_test: int | None = None

    def __post_init__(self):
        if not (self.k_grid and self.M_grid and self.penalty.lambdas and self.estimators):
            raise ConfigError("k_grid, M_grid, lambdas and estimators must be nonempty")
        if min(self.k_grid) < 1 or max(self.k_grid) > self.design.n:
            raise ConfigError(f"k_grid must lie in [1, n={self.design.n}]")
        if min(self.M_grid) < 1:
            raise ConfigError("M_grid entries must be >= 1")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}")
        if "asymptotic" in self.estimators and self.penalty.kind not in (
            PenaltyKind.RIDGE, PenaltyKind.RIDGELESS
        ):
            raise ConfigError("the asymptotic estimator is only available for ridge penalties")
        if self.n_test is not None and self.n_test < 1:
            raise ConfigError("n_test must be >= 1")

    @property
    def effective_n_test(self) -> int:
        return 10 * self.design.n if self.n_test is None else self.n_test


@dataclass(frozen=True)
class ResultRow:
    rep: int
    lam: float
    k: int
    M: int
    estimator: str
    value: float
    status: str = "ok"


# ------------------------------------------------------------- config I/O


def _take(d: dict, allowed: set, where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return d


def _design_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "gaussian_linear":
        _take(d, {"kind", "n", "p", "snr", "sigma2", "spectrum", "sparsity_tail"}, "design")
        spec = dict(d.get("spectrum") or {})
        _take(spec, {"kind", "lo", "hi", "eigenvalues"}, "design.spectrum")
        if "eigenvalues" in spec:
            spec["eigenvalues"] = tuple(float(x) for x in spec["eigenvalues"])
        kwargs = {key: d[key] for key in ("n", "p", "snr", "sigma2", "sparsity_tail") if key in d}
        return GaussianLinearSpec(spectrum=Spectrum(**spec), **kwargs)
    if kind == "nonlinear_ar1":
        _take(d, {"kind", "n", "p", "rho", "feature_law", "noise_sigma2"}, "design")
        return NonlinearAR1Spec(**{key: v for key, v in d.items() if key != "kind"})
    raise ConfigError(f"design.kind must be 'gaussian_linear' or 'nonlinear_ar1', got {kind!r}")


def _penalty_from_dict(d: dict) -> PenaltyGrid:
    _take(d, {"kind", "lambdas", "lambda2"}, "penalty")
    try:
        kind = PenaltyKind(d.get("kind"))
    except ValueError:
        raise ConfigError(f"unknown penalty kind {d.get('kind')!r}") from None
    lambdas = d.get("lambdas", [0.0] if kind is PenaltyKind.RIDGELESS else None)
    if not lambdas:
        raise ConfigError("penalty.lambdas must be a nonempty list")
    lambdas = tuple(float(x) for x in lambdas)
    if any(math.isnan(x) or x < 0 for x in lambdas):
        raise ConfigError("penalty levels must be >= 0")
    lambda2 = float(d.get("lambda2", 0.0))
    if kind is PenaltyKind.ELASTIC_NET and not lambda2 > 0:
        raise ConfigError("elastic net needs penalty.lambda2 > 0")
    if kind is not PenaltyKind.ELASTIC_NET and "lambda2" in d:
        raise ConfigError("penalty.lambda2 is only valid for elastic_net")
    if kind is PenaltyKind.RIDGELESS and any(x != 0 for x in lambdas):
        raise ConfigError("ridgeless penalty levels must be 0")
    return PenaltyGrid(kind, lambdas, lambda2)


def config_from_dict(d: dict) -> ExperimentConfig:
    _take(d, {"design", "penalty", "k_grid", "M_grid", "reps", "seed", "estimators", "n_test"}, "config")
    for key in ("design", "penalty", "k_grid", "M_grid"):
        if key not in d:
            raise ConfigError(f"config: missing required key {key!r}")
    try:
        return ExperimentConfig(
            design=_design_from_dict(d["design"]),
            penalty=_penalty_from_dict(d["penalty"]),
            k_grid=tuple(int(k) for k in d["k_grid"]),
            M_grid=tuple(int(m) for m in d["M_grid"]),
            reps=int(d.get("reps", 1)),
            seed=int(d.get("seed", 0)),
            estimators=tuple(d.get("estimators", ("risk", "gcv", "cgcv_full"))),
            n_test=None if d.get("n_test") is None else int(d["n_test"]),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return config_from_dict(raw)


# ------------------------------------------------------------------ sweep


def rep_seed(seed: int, rep: int) -> int:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(0, int(rep)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _status_of(exc: Exception) -> str:
    if isinstance(exc, EmptyOverlapError):
        return "empty_overlap"
    if isinstance(exc, ConvergenceError):
        return "non_converged"
    return "degenerate"


def _evaluate(name, ens, ctx):
    if name == "risk":
        if ctx["oracle_exact"]:
            return true_risk(ctx["oracle"], ens)
        return empirical_risk(ctx["test"], ens)
    if name == "gcv":
        return R.gcv_full_data(ens)
    if name == "gcv_union":
        return R.gcv_union(ens)
    if name in ("sub", "full"):
        return R.intermediate_estimator(ens, name)
    if name == "cgcv_sub":
        return R.cgcv(ens, "sub")
    if name == "cgcv_full":
        return R.cgcv(ens, "full")
    if name == "tdf":
        return ens.tdf
    if name == "asymptotic":
        eq = ctx["equivalents"]
        if isinstance(eq, Exception):
            raise eq
        return eq.ensemble_risk(ens.M)
    raise ConfigError(f"unknown estimator {name!r}")


def _equivalents(config, oracle, lam, k):
    design = config.design
    try:
        H = SpectralDistribution.from_eigenvalues(np.linalg.eigvalsh(oracle.Sigma))
        return deterministic_equivalents(
            lam, design.p / design.n, design.p / k, H,
            quadratic_from_oracle(oracle.Sigma, oracle.beta0), oracle.sigma2,
        )
    except (RegimeError, InvalidInputError) as exc:
        return exc


def run_rep(config: ExperimentConfig, rep: int) -> list[ResultRow]:
    """All result rows for one repetition, in (k, lambda, M, estimator) order."""
    design = config.design
    seed = rep_seed(config.seed, rep)
    want_risk = "risk" in config.estimators
    if isinstance(design, GaussianLinearSpec):
        data, oracle, test = gen_gaussian_linear(design, seed, n_test=0)
        oracle_exact = True
    else:
        n_test = config.effective_n_test if want_risk else 0
        data, test = gen_nonlinear_ar1(design, seed, n_test=n_test)
        oracle = nonlinear_ar1_oracle(design)
        oracle_exact = False

    pen = config.penalty
    M_max = max(config.M_grid)
    rows: list[ResultRow] = []
    for k in config.k_grid:
        subsets = draw_subsamples(design.n, k, M_max, config.seed, key=(1, rep, k))
        try:
            ensembles = fit_ensemble_path(data.X, data.y, pen.kind, pen.lambdas, subsets, pen.lambda2)
        except ConvergenceError:
            for lam in pen.lambdas:
                for M in config.M_grid:
                    rows.extend(ResultRow(rep, lam, k, M, name, math.nan, "non_converged")
                                for name in config.estimators)
            continue
        for lam, full_ens in zip(pen.lambdas, ensembles):
            ctx = {"oracle": oracle, "test": test, "oracle_exact": oracle_exact}
            if "asymptotic" in config.estimators:
                ctx["equivalents"] = _equivalents(config, oracle, lam, k)
            for M in config.M_grid:
                ens = full_ens.prefix(M)
                for name in config.estimators:
                    try:
                        value = float(_evaluate(name, ens, ctx))
                        status = "ok" if math.isfinite(value) else "degenerate"
                    except (DegenerateDenominatorError, EmptyOverlapError, RegimeError,
                            ConvergenceError, InvalidInputError) as exc:
                        value, status = math.nan, _status_of(exc)
                    if status != "ok":
                        value = math.nan
                    rows.append(ResultRow(rep, lam, k, M, name, value, status))
    return rows


def iter_sweep(config: ExperimentConfig, threads: int = 1) -> Iterator[ResultRow]:
    """Rows for every repetition, in repetition order regardless of ``threads``."""
    reps = range(config.reps)
    if threads <= 1:
        for rep in reps:
            yield from run_rep(config, rep)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for rows in pool.map(lambda r: run_rep(config, r), reps):
            yield from rows


def run_sweep(config: ExperimentConfig, threads: int = 1) -> list[ResultRow]:
    return list(iter_sweep(config, threads))


# -------------------------------------------------------------------- CSV


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(rows: Iterable[ResultRow], path) -> int:
    """Stream rows to ``path``; returns the number of rows written."""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow((row.rep, _fmt(row.lam), row.k, row.M, row.estimator, _fmt(row.value), row.status))
            count += 1
    return count


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise InvalidInputError(f"{path}: unexpected header {header}")
        return [
            ResultRow(int(r[0]), float(r[1]), int(r[2]), int(r[3]), r[4], float(r[5]), r[6])
            for r in reader
        ]


def summarize(rows: Iterable[ResultRow]) -> dict[tuple[float, int, int], dict[str, np.ndarray]]:
    """Group ok-rows by (lambda, k, M) and estimator into per-rep value arrays.

    Cells keep NaN where a repetition failed, so arrays line up by rep.
    """
    table: dict = {}
    for row in rows:
        cell = table.setdefault((row.lam, row.k, row.M), {})
        cell.setdefault(row.estimator, {})[row.rep] = row.value
    out = {}
    for key, per_est in table.items():
        reps = sorted({r for d in per_est.values() for r in d})
        out[key] = {name: np.array([d.get(r, math.nan) for r in reps]) for name, d in per_est.items()}
    return out
