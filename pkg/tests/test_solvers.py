import math

import numpy as np
import pytest

from cgcv.errors import InvalidInputError, NonGenericPointError
from cgcv.solvers import (
    PenaltyConfig,
    PenaltyKind,
    df_finite_difference_oracle,
    elastic_net_path,
    fit,
    fit_elastic_net,
    fit_lasso,
    fit_ridge,
    lasso_path,
    ridge_path,
)

from conftest import random_instance


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


# ---------------------------------------------------------------- ridge


def test_ridge_diagonal_closed_form():
    res = fit_ridge(np.eye(2), np.array([2.0, 4.0]), 0.5)
    np.testing.assert_allclose(res.beta, [1.0, 2.0], atol=1e-15)
    # s_j = 1, k = 2: each direction contributes 1 / (1 + k * lam)
    assert res.df == pytest.approx(1.0, abs=1e-15)


def test_ridge_infinite_penalty_is_null():
    X, y = random_instance(np.random.default_rng(1), 8, 3)
    res = fit_ridge(X, y, math.inf)
    assert np.all(res.beta == 0) and res.df == 0


def test_ridge_matches_normal_equations(rng):
    X, y = random_instance(rng, 10, 3)
    k = X.shape[0]
    direct = np.linalg.solve(X.T @ X / k + np.eye(3), X.T @ y / k)
    res = fit_ridge(X, y, 1.0)
    np.testing.assert_allclose(res.beta, direct, atol=1e-10)
    S = X @ np.linalg.solve(X.T @ X + k * np.eye(3), X.T)
    assert res.df == pytest.approx(np.trace(S), abs=1e-12)
    assert res.kkt_residual <= 1e-10


def test_ridge_df_monotone_in_lambda(rng):
    X, y = random_instance(rng, 20, 12)
    lams = np.logspace(-3, 3, 25)
    dfs = [r.df for r in ridge_path(X, y, lams)]
    assert np.all(np.diff(dfs) <= 1e-12)
    assert all(0 <= d <= 20 for d in dfs)


def test_ridgeless_is_min_norm_interpolator(rng):
    X, y = random_instance(rng, 6, 10)
    res = fit(X, y, PenaltyConfig.ridgeless())
    np.testing.assert_allclose(res.beta, np.linalg.pinv(X) @ y, atol=1e-10)
    assert res.df == 6


# ---------------------------------------------------------------- lasso


def test_lasso_full_shrinkage_threshold(rng):
    X, y = random_instance(rng, 15, 5)
    lam_max = np.max(np.abs(X.T @ y)) / 15
    res = fit_lasso(X, y, lam_max)
    assert np.all(res.beta == 0) and res.df == 0
    assert fit_lasso(X, y, 0.99 * lam_max).df >= 1


def test_lasso_orthonormal_soft_threshold(rng):
    k, p = 16, 4
    Q, _ = np.linalg.qr(rng.standard_normal((k, p)))
    X = Q * math.sqrt(k)  # X'X/k = I
    y = rng.standard_normal(k) * 3
    lam = 0.4
    res = fit_lasso(X, y, lam)
    np.testing.assert_allclose(res.beta, soft_threshold(X.T @ y / k, lam), atol=1e-10)


def test_lasso_df_matches_finite_differences(rng):
    X, y = random_instance(rng, 10, 4)
    lam = 0.1
    res = fit_lasso(X, y, lam)
    fd = df_finite_difference_oracle(lambda A, b: fit_lasso(A, b, lam), X, y)
    assert res.df == len(res.active_set)
    assert fd == pytest.approx(res.df, abs=1e-4)


def test_lasso_kkt(rng):
    X, y = random_instance(rng, 40, 15)
    k, lam = 40, 0.05
    res = fit_lasso(X, y, lam)
    g = X.T @ (y - X @ res.beta) / k
    act = res.active_set
    np.testing.assert_allclose(g[act], lam * np.sign(res.beta[act]), atol=1e-8)
    inactive = np.setdiff1d(np.arange(15), act)
    assert np.all(np.abs(g[inactive]) <= lam + 1e-8)


def test_lasso_path_matches_single_fits(rng):
    X, y = random_instance(rng, 30, 8)
    lams = [0.5, 0.1, 0.01]
    for lam, res in zip(lams, lasso_path(X, y, lams)):
        np.testing.assert_allclose(res.beta, fit_lasso(X, y, lam).beta, atol=1e-7)


# ---------------------------------------------------------- elastic net


def test_elastic_net_zero_l1_is_ridge(rng):
    X, y = random_instance(rng, 12, 5)
    en = fit_elastic_net(X, y, 0.0, 0.3)
    rd = fit_ridge(X, y, 0.3)
    np.testing.assert_allclose(en.beta, rd.beta, atol=1e-8)
    assert en.df == pytest.approx(rd.df, abs=1e-12)


def test_elastic_net_large_l1_is_null(rng):
    X, y = random_instance(rng, 12, 5)
    res = fit_elastic_net(X, y, 1e6, 0.1)
    assert np.all(res.beta == 0) and res.df == 0


def test_elastic_net_df_matches_finite_differences(rng):
    X, y = random_instance(rng, 12, 5)
    res = fit_elastic_net(X, y, 0.1, 0.01)
    fd = df_finite_difference_oracle(lambda A, b: fit_elastic_net(A, b, 0.1, 0.01), X, y)
    assert fd == pytest.approx(res.df, abs=1e-3)


def test_elastic_net_path_shape(rng):
    X, y = random_instance(rng, 25, 6)
    res = elastic_net_path(X, y, [1.0, 0.1, 0.01], 0.05)
    assert len(res) == 3
    assert [r.df for r in res] == sorted(r.df for r in res)


# -------------------------------------------------------------- oracles


def test_finite_difference_exact_for_ridge(rng):
    X, y = random_instance(rng, 9, 4)
    fd = df_finite_difference_oracle(lambda A, b: fit_ridge(A, b, 0.7), X, y)
    assert fd == pytest.approx(fit_ridge(X, y, 0.7).df, abs=1e-6)


def test_finite_difference_flags_non_generic_point():
    # y sits exactly on the kink: |x'y|/k equals lambda for the only feature
    X = np.ones((4, 1))
    y = np.array([1.0, 1.0, 1.0, 1.0])
    with pytest.raises(NonGenericPointError):
        df_finite_difference_oracle(lambda A, b: fit_lasso(A, b, 1.0), X, y)


# ---------------------------------------------------------------- config


@pytest.mark.parametrize(
    "text, expected",
    [
        ("ridge:1", PenaltyConfig(PenaltyKind.RIDGE, 1.0)),
        ("ridgeless", PenaltyConfig.ridgeless()),
        ("lasso:0.05", PenaltyConfig.lasso(0.05)),
        ("elastic_net:0.1,0.01", PenaltyConfig.elastic_net(0.1, 0.01)),
    ],
)
def test_penalty_parse(text, expected):
    assert PenaltyConfig.parse(text) == expected


@pytest.mark.parametrize("text", ["ridge", "lasso:-1", "elastic_net:0.1", "elastic_net:0.1,0", "huber:1", "ridge:x"])
def test_penalty_parse_rejects(text):
    with pytest.raises(InvalidInputError):
        PenaltyConfig.parse(text)


def test_shape_mismatch_rejected():
    with pytest.raises(InvalidInputError):
        fit_ridge(np.ones((3, 2)), np.ones(4), 1.0)
