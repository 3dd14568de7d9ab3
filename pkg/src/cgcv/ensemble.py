"""Subsample index sets and M-ensembles of penalized fits."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CGCVError, InvalidInputError
from .solvers import FitResult, PenaltyConfig, fit, fit_path


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based (Philox) stream for ``(seed, *key)``; independent across keys."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing row indices of one subsample."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidInputError("an index set needs at least one index")
        if idx[0] < 0 or np.any(np.diff(idx) <= 0):
            raise InvalidInputError("indices must be nonnegative and strictly increasing")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return int(self.indices.size)

    def __len__(self):
        return self.k

    def check_within(self, n: int):
        if self.indices[-1] >= n:
            raise InvalidInputError(f"index {self.indices[-1]} out of range for n={n}")


def _partial_fisher_yates(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    perm = np.arange(n)
    swaps = rng.integers(np.arange(k), n)
    for i, j in enumerate(swaps):
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:k])


def draw_subsamples(n: int, k: int, M: int, seed: int, key: Sequence[int] = ()) -> list[IndexSet]:
    """M i.i.d. simple random samples of size k from range(n).

    Draw m uses its own stream keyed by ``(*key, m)``, so the first M' < M
    sets do not depend on M.
    """
    n, k, M = int(n), int(k), int(M)
    if not 1 <= k <= n:
        raise InvalidInputError(f"need 1 <= k <= n, got k={k}, n={n}")
    if M < 1:
        raise InvalidInputError(f"need M >= 1, got {M}")
    return [IndexSet(_partial_fisher_yates(n, k, make_rng(seed, *key, m))) for m in range(M)]


def intersection_size(a: IndexSet, b: IndexSet) -> int:
    """|a ∩ b| by a linear merge of the two sorted index lists."""
    ia, ib = a.indices, b.indices
    i = j = count = 0
    while i < ia.size and j < ib.size:
        if ia[i] == ib[j]:
            count += 1
            i += 1
            j += 1
        elif ia[i] < ib[j]:
            i += 1
        else:
            j += 1
    return count


@dataclass
class Component:
    subset: IndexSet
    result: FitResult
    full_residual: np.ndarray

    @property
    def beta(self):
        return self.result.beta

    @property
    def df(self):
        return self.result.df

    @property
    def k(self):
        return self.subset.k


@dataclass
class EnsembleFit:
    """M component fits plus the quantities every risk estimator shares."""

    components: list[Component]
    n: int
    penalty: PenaltyConfig | None = None

    def __post_init__(self):
        if not self.components:
            raise InvalidInputError("an ensemble needs at least one component")

    @property
    def M(self) -> int:
        return len(self.components)

    @cached_property
    def dfs(self) -> np.ndarray:
        return np.array([c.df for c in self.components])

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([c.k for c in self.components], dtype=float)

    @cached_property
    def tdf(self) -> float:
        return float(self.dfs.mean())

    @cached_property
    def ensemble_beta(self) -> np.ndarray:
        return np.mean([c.beta for c in self.components], axis=0)

    @cached_property
    def residuals(self) -> np.ndarray:
        """n x M matrix whose column m is y - X beta_m."""
        return np.column_stack([c.full_residual for c in self.components])

    @cached_property
    def ensemble_residual(self) -> np.ndarray:
        return self.residuals.mean(axis=1)

    @cached_property
    def membership(self) -> np.ndarray:
        """n x M 0/1 matrix of subsample membership."""
        B = np.zeros((self.n, self.M))
        for m, c in enumerate(self.components):
            B[c.subset.indices, m] = 1.0
        return B

    @cached_property
    def overlaps(self) -> np.ndarray:
        """M x M matrix of |I_m ∩ I_l|."""
        B = self.membership
        return np.rint(B.T @ B)

    def prefix(self, M: int) -> "EnsembleFit":
        """The ensemble made of the first M components."""
        if not 1 <= M <= self.M:
            raise InvalidInputError(f"prefix size {M} out of range 1..{self.M}")
        return EnsembleFit(self.components[:M], self.n, self.penalty)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X) @ self.ensemble_beta


def _component(X, y, subset, result):
    return Component(subset, result, y - X @ result.beta)


def fit_ensemble(X, y, penalty: PenaltyConfig, subsets: Sequence[IndexSet], **solver_kwargs) -> EnsembleFit:
    """Fit one penalized estimator per subsample and average them."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    components = []
    for m, subset in enumerate(subsets):
        subset.check_within(n)
        rows = subset.indices
        try:
            result = fit(X[rows], y[rows], penalty, **solver_kwargs)
        except CGCVError as exc:
            exc.component = m
            raise
        components.append(_component(X, y, subset, result))
    return EnsembleFit(components, n, penalty)


def fit_ensemble_path(X, y, kind, lambdas, subsets: Sequence[IndexSet], lam2=0.0,
                      **solver_kwargs) -> list[EnsembleFit]:
    """One ensemble per penalty level; each subsample is solved along the whole grid at once."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    per_level: list[list[Component]] = [[] for _ in lambdas]
    for m, subset in enumerate(subsets):
        subset.check_within(n)
        rows = subset.indices
        try:
            results = fit_path(X[rows], y[rows], kind, lambdas, lam2, **solver_kwargs)
        except CGCVError as exc:
            exc.component = m
            raise
        for j, result in enumerate(results):
            per_level[j].append(_component(X, y, subset, result))
    return [EnsembleFit(comps, n, comps[0].result.penalty) for comps in per_level]
