"""Streaming covariance estimators and the top-eigenpair helpers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topotrack import CovarianceEstimator, power_iteration, sample_covariance, top_eigenpair

from conftest import random_covariance


def _signals(t, n, seed=0):
    return np.random.default_rng(seed).standard_normal((t, n))


def test_sample_covariance_is_mean_outer():
    sig = _signals(7, 3, seed=1)
    expected = sum(np.outer(row, row) for row in sig) / 7
    np.testing.assert_allclose(sample_covariance(sig), expected, atol=1e-14)


def test_sample_covariance_rejects_vector():
    with pytest.raises(ValueError, match="dimension error"):
        sample_covariance(np.ones(5))


def test_infinite_memory_matches_one_shot():
    sig = _signals(1000, 6, seed=2)
    est = CovarianceEstimator(6, mode="infinite")
    for row in sig:
        est.update(row)
    assert np.abs(est.matrix - sample_covariance(sig)).max() <= 1e-10


def test_update_many_matches_scalar_updates():
    sig = _signals(64, 4, seed=3)
    one = CovarianceEstimator(4, mode="infinite")
    many = CovarianceEstimator(4, mode="infinite")
    for row in sig:
        one.update(row)
    many.update_many(sig)
    np.testing.assert_allclose(one.matrix, many.matrix, atol=1e-12)


def test_window_covers_all_samples_matches_infinite():
    sig = _signals(40, 5, seed=4)
    win = CovarianceEstimator(5, mode="window", window=64)
    inf = CovarianceEstimator(5, mode="infinite")
    win.update_many(sig)
    inf.update_many(sig)
    np.testing.assert_allclose(win.matrix, inf.matrix, atol=1e-10)


def test_window_drops_old_samples():
    sig = _signals(30, 3, seed=5)
    win = CovarianceEstimator(3, mode="window", window=10)
    win.update_many(sig)
    np.testing.assert_allclose(win.matrix, sample_covariance(sig[-10:]), atol=1e-10)


def test_ewma_matches_direct_recursion():
    sig = _signals(25, 3, seed=6)
    beta = 0.9
    est = CovarianceEstimator(3, mode="ewma", beta=beta)
    direct = np.eye(3)  # identity prior, decays geometrically
    for row in sig:
        direct = beta * direct + (1 - beta) * np.outer(row, row)
        est.update(row)
    np.testing.assert_allclose(est.matrix, direct, atol=1e-12)


def test_ewma_stays_psd():
    sig = _signals(200, 4, seed=7)
    est = CovarianceEstimator(4, mode="ewma", beta=0.97)
    est.update_many(sig)
    evals = np.linalg.eigvalsh(est.matrix)
    assert evals.min() >= -1e-12


def test_scale_prior_wiped_by_first_sample_infinite():
    est = CovarianceEstimator(3, mode="infinite", scale=5.0)
    np.testing.assert_allclose(est.matrix, 5.0 * np.eye(3))
    est.update(np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(est.matrix, np.outer([1, 0, 0], [1, 0, 0]), atol=1e-14)


def test_warmup_block_counts_as_history():
    sig = _signals(50, 4, seed=8)
    warm = CovarianceEstimator(4, mode="infinite", warmup=sig[:20])
    warm.update_many(sig[20:])
    cold = CovarianceEstimator(4, mode="infinite")
    cold.update_many(sig)
    np.testing.assert_allclose(warm.matrix, cold.matrix, atol=1e-10)


def test_matrix_snapshot_is_stable():
    est = CovarianceEstimator(3, mode="infinite")
    est.update(np.array([1.0, 2.0, 3.0]))
    snap = est.matrix.copy()
    before = est.matrix
    est.update(np.array([-1.0, 0.5, 0.0]))
    np.testing.assert_array_equal(before, snap)


def test_rejects_unknown_mode():
    with pytest.raises(ValueError, match="parameter error"):
        CovarianceEstimator(3, mode="sliding")


def test_rejects_wrong_signal_length():
    est = CovarianceEstimator(3)
    with pytest.raises(ValueError, match="dimension error"):
        est.update(np.ones(4))


def test_power_iteration_matches_eigh():
    cov = random_covariance(12, seed=9, distinct_gap=0.5)
    rho, vec, converged = power_iteration(cov, rtol=1e-12, max_iters=5000)
    evals, evecs = np.linalg.eigh(cov)
    assert converged
    assert rho == pytest.approx(evals[-1], rel=1e-9)
    assert abs(abs(vec @ evecs[:, -1]) - 1.0) < 1e-6


def test_power_iteration_deterministic():
    cov = random_covariance(8, seed=10, distinct_gap=0.3)
    a = power_iteration(cov)
    b = power_iteration(cov)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1], b[1])


def test_top_eigenpair_falls_back_exactly():
    cov = random_covariance(10, seed=11, distinct_gap=0.4)
    lam, vec = top_eigenpair(cov)
    assert lam == pytest.approx(np.linalg.eigvalsh(cov)[-1], rel=1e-9)
    resid = np.linalg.norm(cov @ vec - lam * vec)
    assert resid < 1e-6 * lam


@settings(max_examples=25, deadline=None)
@given(t=st.integers(min_value=1, max_value=60), seed=st.integers(0, 2**16))
def test_streaming_always_matches_batch(t, seed):
    sig = _signals(t, 3, seed=seed)
    est = CovarianceEstimator(3, mode="infinite")
    est.update_many(sig)
    assert np.abs(est.matrix - sample_covariance(sig)).max() <= 1e-10
