import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ltune import surrogate
from ltune.sampling import lhs_sample
from ltune.surrogate import AcquisitionParams, Kernel


def dense_posterior(Z, s, kernel, q):
    """Posterior by an explicit dense inverse, independent of the Cholesky path."""
    K = np.array([[kernel.signal_variance * math.exp(-0.5 * np.sum(((a - b) / kernel.length_scales) ** 2))
                   for b in Z] for a in Z]) + (kernel.noise + kernel.jitter) * np.eye(len(Z))
    k = np.array([kernel.signal_variance * math.exp(-0.5 * np.sum(((q - b) / kernel.length_scales) ** 2))
                  for b in Z])
    Kinv = np.linalg.inv(K)
    return k @ Kinv @ s, math.sqrt(max(kernel.signal_variance - k @ Kinv @ k, 0.0))


def random_gp(seed, n=12, d=3, noise=1e-3):
    rng = np.random.default_rng(seed)
    Z, s = rng.random((n, d)), rng.normal(size=n)
    kernel = Kernel(1.3, rng.uniform(0.3, 1.0, d), noise)
    return Z, s, kernel, surrogate.gp_fit(Z, s, kernel)


@pytest.mark.parametrize("seed", range(5))
def test_posterior_matches_dense_inverse(seed):
    Z, s, kernel, model = random_gp(seed)
    for q in np.random.default_rng(100 + seed).random((10, 3)):
        mu, sd = surrogate.gp_posterior(model, q)
        mu_ref, sd_ref = dense_posterior(Z, s, kernel, q)
        assert abs(mu - mu_ref) <= 1e-8 and abs(sd - sd_ref) <= 1e-8


def test_interpolates_noise_free_data():
    rng = np.random.default_rng(1)
    Z, s = rng.random((5, 3)), rng.normal(size=5)
    model = surrogate.gp_fit(Z, s, Kernel(1.0, [0.5, 0.5, 0.5]))
    for z, value in zip(Z, s):
        mu, sd = surrogate.gp_posterior(model, z)
        # the exact sigma here is just below sqrt(jitter) = 1e-4; allow for roundoff
        assert abs(mu - value) <= 1e-4 and sd <= 1e-4 * (1 + 1e-6)
    single = surrogate.gp_fit(np.array([[0.3, 0.6]]), np.array([3.0]), Kernel(1.0, [0.5, 0.5]))
    assert surrogate.gp_posterior(single, np.array([0.3, 0.6]))[0] == pytest.approx(3.0, abs=1e-6)


def test_far_points_revert_to_prior():
    _, _, kernel, model = random_gp(2)
    mu, sd = surrogate.gp_posterior(model, np.full(3, 50.0))
    assert abs(mu) < 1e-12 and sd == pytest.approx(math.sqrt(kernel.signal_variance), rel=1e-12)


def test_duplicate_points_are_handled_by_jitter():
    Z = np.array([[0.2, 0.2], [0.2, 0.2], [0.7, 0.1]])
    model = surrogate.gp_fit(Z, np.array([1.0, 1.0, -1.0]), Kernel(1.0, [0.5, 0.5]))
    assert model.jitter >= surrogate.JITTER
    mu, _ = surrogate.gp_posterior(model, np.array([0.2, 0.2]))
    assert mu == pytest.approx(1.0, abs=1e-4)
    conflicting = surrogate.gp_fit(Z, np.array([1.0, 2.0, -1.0]), Kernel(1.0, [0.5, 0.5]))
    mu, _ = surrogate.gp_posterior(conflicting, np.array([0.2, 0.2]))
    assert 1.0 < mu < 2.0


def test_gp_append_matches_refit():
    Z, s, kernel, model = random_gp(3, n=20)
    grown = surrogate.gp_fit(Z[:5], s[:5], kernel)
    for z, v in zip(Z[5:], s[5:]):
        grown = surrogate.gp_append(grown, z, v)
    np.testing.assert_allclose(grown.chol, model.chol, atol=1e-10)
    q = np.random.default_rng(0).random((30, 3))
    for a, b in zip(surrogate.gp_posterior_batch(grown, q), surrogate.gp_posterior_batch(model, q)):
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_gp_input_errors():
    kernel = Kernel(1.0, [1.0])
    with pytest.raises(ValueError):
        surrogate.gp_fit(np.zeros((0, 1)), np.zeros(0), kernel)
    with pytest.raises(ValueError):
        surrogate.gp_fit(np.zeros((2, 1)), np.array([0.0, np.nan]), kernel)
    with pytest.raises(ValueError):
        Kernel(0.0, [1.0])
    model = surrogate.gp_fit(np.zeros((1, 1)), np.zeros(1), kernel)
    with pytest.raises(ValueError):
        surrogate.gp_posterior(model, np.zeros(2))


def test_fit_kernel_prefers_relevant_dimension():
    rng = np.random.default_rng(0)
    Z = rng.random((80, 3))
    s = np.sin(6 * Z[:, 0])
    kernel = surrogate.fit_kernel(Z, s)
    assert kernel.length_scales[0] < kernel.length_scales[1]
    assert kernel.length_scales[0] < kernel.length_scales[2]
    start = surrogate.Kernel(float(np.var(s)), np.full(3, 0.4), 1e-6)
    assert surrogate.log_marginal_likelihood(Z, s, kernel) >= surrogate.log_marginal_likelihood(Z, s, start) - 1e-9


def test_fit_kernel_is_deterministic_and_bounded():
    rng = np.random.default_rng(1)
    Z, s = rng.random((300, 2)), rng.normal(size=300)
    a = surrogate.fit_kernel(Z, s, seed=5)
    b = surrogate.fit_kernel(Z, s, seed=5)
    assert np.array_equal(a.length_scales, b.length_scales)
    assert np.all((a.length_scales >= 1e-2) & (a.length_scales <= 1e1))


def test_normal_cdf_and_pdf_reference_values():
    with mpmath.workdps(30):
        ref = float(mpmath.ncdf(1.96))
    assert surrogate.normal_cdf(1.96) == pytest.approx(ref, rel=1e-14)
    assert surrogate.normal_cdf(0.0) == 0.5
    assert surrogate.normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert surrogate.normal_cdf(-30.0) == pytest.approx(float(mpmath.ncdf(-30)), rel=1e-12)
    assert abs(surrogate.normal_cdf(1.96) - 0.9750021048517795) <= 1e-10
    assert surrogate.normal_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-16)


@given(x=st.floats(-40, 40))
def test_normal_cdf_absolute_accuracy(x):
    with mpmath.workdps(30):
        ref = float(mpmath.ncdf(x))
    assert abs(surrogate.normal_cdf(x) - ref) <= 1e-12


def test_ei_matches_monte_carlo():
    rng = np.random.default_rng(0)
    params = AcquisitionParams(f_best=0.3, xi=0.01)
    for mu, sigma in [(0.5, 0.2), (0.0, 1.0), (0.31, 0.05)]:
        draws = rng.normal(mu, sigma, 2_000_000)
        mc = np.maximum(draws - 0.31, 0.0)
        ei = surrogate.expected_improvement(mu, sigma, params)
        assert abs(ei - mc.mean()) <= 4 * mc.std() / math.sqrt(len(mc))


def test_ei_at_zero_gamma_is_pdf_at_zero():
    params = AcquisitionParams(f_best=0.4, xi=0.01)
    assert surrogate.expected_improvement(0.41, 1.0, params) == pytest.approx(0.3989422804014327, rel=1e-12)


def test_ei_with_zero_sigma():
    params = AcquisitionParams(f_best=1.0, xi=0.1)
    assert surrogate.expected_improvement(1.5, 0.0, params) == pytest.approx(0.4)
    assert surrogate.expected_improvement(0.5, 0.0, params) == 0.0
    assert surrogate.expected_improvement(1.0, 0.0, AcquisitionParams(1.0, 0.0)) == 0.0
    with pytest.raises(ValueError):
        surrogate.expected_improvement(0.5, -1.0, params)


@given(mu=st.floats(-10, 10), sigma=st.floats(0, 10), f_best=st.floats(-10, 10), xi=st.floats(0, 1))
def test_ei_is_nonnegative(mu, sigma, f_best, xi):
    assert surrogate.expected_improvement(mu, sigma, AcquisitionParams(f_best, xi)) >= 0.0


@given(mu=st.floats(-5, 5), s1=st.floats(0.01, 5), s2=st.floats(0.01, 5))
def test_ei_is_monotone_in_sigma(mu, s1, s2):
    params = AcquisitionParams(0.0, 0.01)
    lo, hi = sorted((s1, s2))
    assert surrogate.expected_improvement(mu, hi, params) >= surrogate.expected_improvement(mu, lo, params) - 1e-12


def test_propose_basics():
    _, _, _, model = random_gp(4)
    params = AcquisitionParams(float(model.s.max()))
    z1, ei1 = surrogate.propose(model, params, Q=256, seed=7)
    z2, ei2 = surrogate.propose(model, params, Q=256, seed=7)
    assert np.array_equal(z1, z2) and ei1 == ei2
    assert z1.shape == (3,) and np.all((z1 >= 0) & (z1 <= 1))
    assert ei1 == surrogate.expected_improvement(*surrogate.gp_posterior(model, z1), params)
    z, _ = surrogate.propose(model, params, Q=1, seed=0)
    assert np.array_equal(z, lhs_sample(3, 1, 0).matrix[0])
    with pytest.raises(ValueError):
        surrogate.propose(model, params, Q=0)


def test_proposals_concentrate_near_the_best_point():
    rng = np.random.default_rng(3)
    Z = rng.random((8, 2))
    s = np.zeros(8)
    s[2], s[5] = 5.0, -5.0
    model = surrogate.gp_fit(Z, s, Kernel(1.0, [0.1, 0.1], 1e-6))
    params = AcquisitionParams(f_best=5.0)
    picks = np.array([surrogate.propose(model, params, Q=512, seed=seed)[0] for seed in range(20)])
    to_best = np.median(np.linalg.norm(picks - Z[2], axis=1))
    to_worst = np.median(np.linalg.norm(picks - Z[5], axis=1))
    assert to_best < to_worst
