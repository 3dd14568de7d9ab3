import numpy as np
import pytest

from cgcv.ensemble import (
    IndexSet,
    draw_subsamples,
    fit_ensemble,
    fit_ensemble_path,
    intersection_size,
    make_rng,
)
from cgcv.errors import InvalidInputError
from cgcv.solvers import PenaltyConfig, PenaltyKind, fit_ridge

from conftest import random_instance


def test_full_subsample_is_everything():
    for s in draw_subsamples(12, 12, 3, seed=5):
        np.testing.assert_array_equal(s.indices, np.arange(12))


def test_draws_are_sorted_unique_and_in_range():
    for s in draw_subsamples(50, 20, 10, seed=1):
        assert s.k == 20
        assert np.all(np.diff(s.indices) > 0)
        assert 0 <= s.indices[0] and s.indices[-1] < 50


def test_same_seed_same_sets():
    a = draw_subsamples(100, 30, 4, seed=9, key=(2, 3))
    b = draw_subsamples(100, 30, 4, seed=9, key=(2, 3))
    assert all(np.array_equal(x.indices, y.indices) for x, y in zip(a, b))
    c = draw_subsamples(100, 30, 4, seed=10, key=(2, 3))
    assert not all(np.array_equal(x.indices, y.indices) for x, y in zip(a, c))


def test_prefix_nesting_across_M():
    big = draw_subsamples(80, 25, 6, seed=3)
    small = draw_subsamples(80, 25, 2, seed=3)
    for x, y in zip(small, big):
        np.testing.assert_array_equal(x.indices, y.indices)


def test_overlap_is_hypergeometric():
    n, k, reps = 100, 50, 10_000
    sizes = np.array([
        intersection_size(*draw_subsamples(n, k, 2, seed=s)) for s in range(reps)
    ])
    mean = k * k / n
    # hypergeometric variance k(k/n)(1-k/n)(n-k)/(n-1)
    var = k * (k / n) * (1 - k / n) * (n - k) / (n - 1)
    assert abs(sizes.mean() - mean) < 3 * np.sqrt(var / reps)
    assert sizes.var() <= k * k / n


def test_uniform_inclusion():
    counts = np.zeros(10)
    for s in range(4000):
        counts[draw_subsamples(10, 3, 1, seed=s)[0].indices] += 1
    freq = counts / 4000
    assert np.all(np.abs(freq - 0.3) < 4 * np.sqrt(0.3 * 0.7 / 4000))


@pytest.mark.parametrize(
    "a, b, expected",
    [([1, 2, 3], [2, 3, 5], 2), ([0, 4], [1, 5], 0), ([3, 7, 9], [3, 7, 9], 3)],
)
def test_intersection_size(a, b, expected):
    assert intersection_size(IndexSet(np.array(a)), IndexSet(np.array(b))) == expected


def test_index_set_validation():
    with pytest.raises(InvalidInputError):
        IndexSet(np.array([2, 1]))
    with pytest.raises(InvalidInputError):
        IndexSet(np.array([1, 1]))
    with pytest.raises(InvalidInputError):
        draw_subsamples(5, 6, 1, seed=0)
    with pytest.raises(InvalidInputError):
        IndexSet(np.array([0, 7])).check_within(5)


def test_philox_streams_independent_by_key():
    a = make_rng(1, 0).standard_normal(4)
    b = make_rng(1, 1).standard_normal(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, make_rng(1, 0).standard_normal(4))


def test_single_full_component_is_plain_ridge(rng):
    X, y = random_instance(rng, 30, 5)
    ens = fit_ensemble(X, y, PenaltyConfig.ridge(0.5), [IndexSet(np.arange(30))])
    ref = fit_ridge(X, y, 0.5)
    np.testing.assert_allclose(ens.ensemble_beta, ref.beta, atol=1e-14)
    assert ens.tdf == pytest.approx(ref.df)


def test_identical_subsets_give_identical_components(rng):
    X, y = random_instance(rng, 30, 5)
    s = draw_subsamples(30, 15, 1, seed=2)[0]
    ens = fit_ensemble(X, y, PenaltyConfig.lasso(0.05), [s, s])
    np.testing.assert_array_equal(ens.components[0].beta, ens.components[1].beta)
    np.testing.assert_array_equal(ens.ensemble_beta, ens.components[0].beta)


def test_linearity_and_permutation(rng):
    X, y = random_instance(rng, 60, 8)
    subsets = draw_subsamples(60, 25, 4, seed=4)
    ens = fit_ensemble(X, y, PenaltyConfig.ridge(0.3), subsets)
    assert ens.tdf == np.mean([c.df for c in ens.components])
    preds = np.mean([X @ c.beta for c in ens.components], axis=0)
    np.testing.assert_allclose(ens.predict(X), preds, atol=1e-12)
    rev = fit_ensemble(X, y, PenaltyConfig.ridge(0.3), subsets[::-1])
    np.testing.assert_allclose(rev.ensemble_beta, ens.ensemble_beta, atol=1e-14)
    assert rev.tdf == pytest.approx(ens.tdf, abs=1e-13)


def test_membership_and_overlaps(rng):
    X, y = random_instance(rng, 40, 4)
    subsets = draw_subsamples(40, 10, 3, seed=8)
    ens = fit_ensemble(X, y, PenaltyConfig.ridge(1.0), subsets)
    for m in range(3):
        for l in range(3):
            assert ens.overlaps[m, l] == intersection_size(subsets[m], subsets[l])
    assert ens.membership.sum() == 30


def test_path_matches_single_fits(rng):
    X, y = random_instance(rng, 50, 6)
    subsets = draw_subsamples(50, 20, 3, seed=1)
    lams = [1.0, 0.1]
    for kind, pen in [(PenaltyKind.RIDGE, PenaltyConfig.ridge), (PenaltyKind.LASSO, PenaltyConfig.lasso)]:
        path = fit_ensemble_path(X, y, kind, lams, subsets)
        for lam, ens in zip(lams, path):
            ref = fit_ensemble(X, y, pen(lam), subsets)
            np.testing.assert_allclose(ens.ensemble_beta, ref.ensemble_beta, atol=1e-7)


def test_prefix(rng):
    X, y = random_instance(rng, 40, 4)
    ens = fit_ensemble(X, y, PenaltyConfig.ridge(1.0), draw_subsamples(40, 10, 5, seed=0))
    sub = ens.prefix(2)
    assert sub.M == 2 and sub.components == ens.components[:2]
    with pytest.raises(InvalidInputError):
        ens.prefix(6)


@pytest.mark.slow
def test_large_configuration_runs():
    from cgcv.datagen import GaussianLinearSpec, gen_gaussian_linear
    from cgcv.risk import cgcv, gcv_full_data

    data, _, _ = gen_gaussian_linear(GaussianLinearSpec(2000, 500), seed=0, n_test=0)
    subsets = draw_subsamples(2000, 800, 2, seed=0)
    lams = np.logspace(-3, 2, 6)
    for ens in fit_ensemble_path(data.X, data.y, PenaltyKind.RIDGE, lams, subsets):
        assert np.isfinite(gcv_full_data(ens)) and np.isfinite(cgcv(ens))
