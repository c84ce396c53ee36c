import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmminit.core import (
    GaussianComponent,
    GmmParams,
    as_data_matrix,
    cholesky,
    gaussian_log_pdf,
    log_likelihood,
    mahalanobis_sq,
    min_mahalanobis,
    mixture_log_pdf,
    mixture_log_pdf_batch,
    mle_single_gaussian,
)

from conftest import random_spd


def naive_log_pdf(x, mean, cov):
    """Dense inverse / determinant evaluation of the Gaussian density."""
    d = len(mean)
    diff = np.asarray(x) - np.asarray(mean)
    inv = np.linalg.inv(cov)
    det = np.linalg.det(cov)
    return -0.5 * d * math.log(2 * math.pi) - 0.5 * math.log(det) - 0.5 * diff @ inv @ diff


def random_mixture(rng, k, d):
    w = rng.uniform(0.2, 1.0, size=k)
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    means = rng.normal(scale=3.0, size=(k, d))
    covs = [random_spd(rng, d) for _ in range(k)]
    return GmmParams.from_arrays(w, means, covs)


# ---------------------------------------------------------------------------
# cholesky


def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(3)), np.eye(3))


def test_cholesky_hand_example():
    L = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], rtol=1e-15)


def test_cholesky_not_pd_signals_none():
    assert cholesky(np.array([[1.0, 2.0], [2.0, 1.0]])) is None
    assert cholesky(np.zeros((2, 2))) is None


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_cholesky_pivot_threshold():
    # second pivot is 1e-14 relative to the diagonal scale, below the 1e-12 bar
    m = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14]])
    assert cholesky(m) is None
    assert cholesky(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-9]])) is not None


@given(d=st.integers(1, 8), seed=st.integers(0, 2**32 - 1), eps=st.floats(1e-6, 10.0))
def test_cholesky_roundtrip(d, seed, eps):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    m = a @ a.T + eps * np.eye(d)
    m = 0.5 * (m + m.T)
    L = cholesky(m)
    assert L is not None
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ L.T - m) / np.linalg.norm(m) <= 1e-10


# ---------------------------------------------------------------------------
# component types


def test_component_rejects_non_pd():
    with pytest.raises(ValueError):
        GaussianComponent(1.0, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_component_is_read_only():
    c = GaussianComponent(1.0, [0.0], [[1.0]])
    with pytest.raises(ValueError):
        c.mean[0] = 3.0


def test_gmm_params_weight_simplex():
    c = GaussianComponent(0.5, [0.0], [[1.0]])
    with pytest.raises(ValueError):
        GmmParams((c,))
    GmmParams((c, c))


def test_gmm_params_mixed_dims():
    with pytest.raises(ValueError):
        GmmParams((GaussianComponent(0.5, [0.0], [[1.0]]),
                   GaussianComponent(0.5, [0.0, 0.0], np.eye(2))))


def test_as_data_matrix_validation():
    assert as_data_matrix([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(ValueError):
        as_data_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_data_matrix(np.empty((0, 2)))


# ---------------------------------------------------------------------------
# densities


def test_standard_normal_at_mode():
    c = GaussianComponent(1.0, [0.0], [[1.0]])
    assert gaussian_log_pdf([0.0], c) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)
    assert gaussian_log_pdf([0.0], c) == pytest.approx(-0.9189385332046727, abs=1e-15)


def test_log_pdf_at_mean(rng):
    cov = random_spd(rng, 4)
    mu = rng.normal(size=4)
    c = GaussianComponent(1.0, mu, cov)
    expected = -2 * math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(cov))
    assert gaussian_log_pdf(mu, c) == pytest.approx(expected, rel=1e-12)


def test_log_pdf_matches_dense_oracle(rng):
    for _ in range(20):
        cov = random_spd(rng, 3)
        mu, x = rng.normal(size=3), rng.normal(size=3)
        c = GaussianComponent(1.0, mu, cov)
        assert gaussian_log_pdf(x, c) == pytest.approx(naive_log_pdf(x, mu, cov), rel=1e-10)


def test_log_pdf_dimension_mismatch():
    c = GaussianComponent(1.0, [0.0, 0.0], np.eye(2))
    with pytest.raises(ValueError):
        gaussian_log_pdf([0.0, 0.0, 0.0], c)


def test_mixture_single_component_equals_gaussian(rng):
    c = GaussianComponent(1.0, rng.normal(size=2), random_spd(rng, 2))
    x = rng.normal(size=2)
    assert mixture_log_pdf(x, GmmParams((c,))) == gaussian_log_pdf(x, c)


def test_mixture_identical_components(rng):
    mu, cov = rng.normal(size=2), random_spd(rng, 2)
    a, b = GaussianComponent(0.3, mu, cov), GaussianComponent(0.7, mu, cov)
    x = rng.normal(size=2)
    one = gaussian_log_pdf(x, GaussianComponent(1.0, mu, cov))
    assert mixture_log_pdf(x, GmmParams((a, b))) == pytest.approx(one, abs=1e-13)


def test_mixture_matches_extended_precision_sum(rng):
    mpmath.mp.dps = 50
    for _ in range(10):
        theta = random_mixture(rng, 3, 2)
        x = rng.normal(scale=4.0, size=2)
        total = mpmath.mpf(0)
        for c in theta:
            inv = np.linalg.inv(c.covariance)
            diff = x - c.mean
            q = mpmath.mpf(float(diff @ inv @ diff))
            det = mpmath.mpf(float(np.linalg.det(c.covariance)))
            dens = mpmath.exp(-q / 2) / (2 * mpmath.pi * mpmath.sqrt(det))
            total += mpmath.mpf(c.weight) * dens
        assert mixture_log_pdf(x, theta) == pytest.approx(float(mpmath.log(total)), rel=1e-10)


def test_mixture_far_point_stays_finite():
    theta = GmmParams((GaussianComponent(1.0, np.zeros(57), np.eye(57)),))
    x = np.full(57, 200.0)
    assert math.isfinite(mixture_log_pdf(x, theta))


def test_mixture_density_integrates_to_one():
    rng = np.random.default_rng(7)
    theta = GmmParams.from_arrays([0.4, 0.6], [[-2.0], [3.0]], [[[0.5]], [[2.0]]])
    lo, hi = -15.0, 20.0
    u = rng.uniform(lo, hi, size=1_000_000)
    est = np.mean(np.exp(mixture_log_pdf_batch(u[:, None], theta))) * (hi - lo)
    assert est == pytest.approx(1.0, rel=0.01)


def test_log_likelihood_single_row(rng):
    theta = random_mixture(rng, 2, 2)
    x = rng.normal(size=2)
    assert log_likelihood(x[None, :], theta) == mixture_log_pdf(x, theta)


def test_log_likelihood_duplicated_data(rng):
    theta = random_mixture(rng, 3, 2)
    X = rng.normal(size=(50, 2))
    assert log_likelihood(np.vstack([X, X]), theta) == pytest.approx(2 * log_likelihood(X, theta), rel=1e-15)


def test_log_likelihood_matches_loop(rng):
    theta = random_mixture(rng, 2, 3)
    X = rng.normal(size=(100, 3))
    naive = 0.0
    for x in X:
        naive += math.log(sum(c.weight * math.exp(naive_log_pdf(x, c.mean, c.covariance)) for c in theta))
    assert log_likelihood(X, theta) == pytest.approx(naive, rel=1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_log_likelihood_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    theta = random_mixture(rng, 3, 2)
    X = rng.normal(scale=3, size=(40, 2))
    assert log_likelihood(X[rng.permutation(40)], theta) == log_likelihood(X, theta)


# ---------------------------------------------------------------------------
# Mahalanobis


def test_mahalanobis_trivial(rng):
    mu = rng.normal(size=3)
    c = GaussianComponent(1.0, mu, random_spd(rng, 3))
    assert mahalanobis_sq(mu, c) == 0.0
    ident = GaussianComponent(1.0, mu, np.eye(3))
    x = rng.normal(size=3)
    assert mahalanobis_sq(x, ident) == pytest.approx(float(np.sum((x - mu) ** 2)), rel=1e-14)


def test_mahalanobis_dense_oracle(rng):
    for _ in range(20):
        cov, mu, x = random_spd(rng, 4), rng.normal(size=4), rng.normal(size=4)
        expected = (x - mu) @ np.linalg.inv(cov) @ (x - mu)
        assert mahalanobis_sq(x, GaussianComponent(1.0, mu, cov)) == pytest.approx(expected, rel=1e-10)


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_mahalanobis_nonnegative(seed, d):
    rng = np.random.default_rng(seed)
    c = GaussianComponent(1.0, rng.normal(size=d), random_spd(rng, d))
    x = rng.normal(scale=10, size=d)
    assert mahalanobis_sq(x, c) >= 0.0
    assert mahalanobis_sq(c.mean, c) <= 1e-10


def test_min_mahalanobis(rng):
    theta = random_mixture(rng, 3, 2)
    assert min_mahalanobis(theta.means[1], theta) == 0.0
    single = GmmParams((theta[0].with_weight(1.0),))
    x = rng.normal(size=2)
    assert min_mahalanobis(x, single) == mahalanobis_sq(x, theta[0])
    for _ in range(20):
        x = rng.normal(scale=3, size=2)
        assert min_mahalanobis(x, theta) == pytest.approx(min(mahalanobis_sq(x, c) for c in theta), rel=1e-14)


# ---------------------------------------------------------------------------
# single-Gaussian MLE


def test_mle_singular_two_points():
    c = mle_single_gaussian([[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_array_equal(c.mean, [1.0, 0.0])
    # scatter [[1,0],[0,0]] is singular -> (1/(D*N)) * sum ||x - mu||^2 = 2/4
    np.testing.assert_allclose(c.covariance, 0.5 * np.eye(2), rtol=1e-15)
    assert c.weight == 1.0


def test_mle_single_point_identity():
    c = mle_single_gaussian([[3.0, -1.0, 2.0]])
    np.testing.assert_array_equal(c.covariance, np.eye(3))


def test_mle_recovers_parameters():
    rng = np.random.default_rng(2024)
    mu = np.array([1.0, -2.0])
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    X = rng.multivariate_normal(mu, cov, size=1000)
    c = mle_single_gaussian(X)
    se_mean = np.sqrt(np.diag(cov) / 1000)
    assert np.all(np.abs(c.mean - mu) < 3 * se_mean)
    # var of sample covariance entry (i,j) is (s_ii s_jj + s_ij^2) / n
    se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov ** 2) / 1000)
    assert np.all(np.abs(c.covariance - cov) < 3 * se_cov)


def test_mle_is_a_maximum():
    rng = np.random.default_rng(99)
    for _ in range(20):
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(int(rng.integers(10, 60)), d)) @ random_spd(rng, d)
        c = mle_single_gaussian(X)
        best = log_likelihood(X, GmmParams((c,)))
        for _ in range(50):
            dm = rng.normal(scale=1e-2, size=d)
            a = rng.normal(scale=1e-2, size=(d, d))
            cov = c.covariance + 0.5 * (a + a.T)
            if cholesky(0.5 * (cov + cov.T)) is None:
                continue
            pert = GaussianComponent(1.0, c.mean + dm, 0.5 * (cov + cov.T))
            assert log_likelihood(X, GmmParams((pert,))) <= best + 1e-9
