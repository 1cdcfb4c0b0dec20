import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitsim import (
    LinearPotential,
    NumericsError,
    SufficientStats,
    ValidationError,
    exact_posterior,
    sherman_morrison_update,
)

from conftest import random_stats


def test_single_update_against_direct_inversion():
    stats = SufficientStats(2, 1.0)
    sherman_morrison_update(stats, np.array([1.0, 0.0]), 0.0)
    np.testing.assert_allclose(stats.V, np.diag([2.0, 1.0]))
    np.testing.assert_allclose(stats.V_inv, np.diag([0.5, 1.0]), atol=1e-14)
    np.testing.assert_allclose(stats.V_inv, np.linalg.inv(stats.V), atol=1e-14)
    np.testing.assert_allclose(stats.b, np.zeros(2))
    assert stats.n_obs == 1


def test_zero_feature_is_a_noop_on_V_and_b():
    stats = random_stats(3, seed=5)
    V_inv, b = stats.V_inv.copy(), stats.b.copy()
    sherman_morrison_update(stats, np.zeros(3), 7.5)
    np.testing.assert_array_equal(stats.V_inv, V_inv)
    np.testing.assert_array_equal(stats.b, b)


def test_many_updates_track_dense_inverse():
    gen = np.random.default_rng(42)
    stats = SufficientStats(5, 1.0)
    worst = 0.0
    for _ in range(200):
        phi = gen.standard_normal(5)
        phi /= np.linalg.norm(phi)
        sherman_morrison_update(stats, phi, float(gen.standard_normal()))
        worst = max(worst, np.linalg.norm(stats.V_inv - np.linalg.inv(stats.V)))
    assert worst <= 1e-9


def test_gram_matrix_never_drops_below_prior_precision():
    for lam in (1.0, 0.3):
        stats = random_stats(4, lam=lam, n_updates=50, seed=3)
        assert stats.lambda_min >= lam - 1e-10
        assert stats.condition_number >= 1.0
        assert np.linalg.norm(stats.V @ stats.V_inv - np.eye(4)) <= 1e-8


@pytest.mark.parametrize(
    "phi,r",
    [
        (np.array([np.nan, 0.0]), 1.0),
        (np.array([np.inf, 0.0]), 1.0),
        (np.array([1.0, 0.0]), np.nan),
        (np.array([1.5, 0.0]), 1.0),  # norm > 1
        (np.array([1.0, 0.0, 0.0]), 1.0),  # wrong shape
    ],
)
def test_bad_observations_rejected(phi, r):
    stats = SufficientStats(2, 1.0)
    with pytest.raises(ValidationError):
        sherman_morrison_update(stats, phi, r)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=6))
def test_update_invariants_hold_for_any_observation_stream(seeds):
    stats = SufficientStats(3, 0.7)
    for s in seeds:
        gen = np.random.default_rng(s)
        phi = gen.standard_normal(3)
        phi /= max(1.0, np.linalg.norm(phi))
        sherman_morrison_update(stats, phi, float(gen.standard_normal()))
    assert stats.lambda_min >= 0.7 - 1e-10
    assert stats.lambda_min <= stats.lambda_max
    np.testing.assert_allclose(stats.V_inv, stats.V_inv.T)
    assert np.linalg.norm(stats.V @ stats.V_inv - np.eye(3)) <= 1e-8


def test_exact_posterior_of_prior_is_prior():
    stats = SufficientStats(3, 1.0)
    post = exact_posterior(stats, 1.0)
    np.testing.assert_allclose(post.mu_hat, np.zeros(3))
    np.testing.assert_allclose(post.sigma_hat, np.eye(3))


def test_exact_posterior_scalar_case():
    stats = SufficientStats(1, 1.0)
    sherman_morrison_update(stats, np.array([1.0]), 1.0)  # V=2, b=1
    post = exact_posterior(stats, 0.5)
    assert post.mu_hat[0] == pytest.approx(0.5)
    assert post.sigma_hat[0, 0] == pytest.approx(1.0)


def test_gradient_vanishes_at_posterior_mean():
    stats = random_stats(6, n_updates=40, seed=9)
    post = exact_posterior(stats, 0.37)
    grad = LinearPotential(stats, 0.37).grad(post.mu_hat)
    assert np.max(np.abs(grad)) <= 1e-10
    np.testing.assert_allclose(post.sigma_hat, post.sigma_hat.T, atol=1e-12)
    np.testing.assert_allclose(
        stats.V @ (0.37 * post.sigma_hat), np.eye(6), atol=1e-8
    )


def test_singularity_guard_is_wired():
    stats = SufficientStats(2, 1.0)
    stats.V = np.diag([1.0, 1e-30])  # corrupted state; guard must trip
    with pytest.raises(NumericsError):
        sherman_morrison_update(stats, np.array([0.1, 0.0]), 0.0)
