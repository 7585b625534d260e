"""Filter construction, covariance model, and signal generation.

Frozen oracle values for the path graph P3 with H = I + 0.5 A:

    H^2 = I + A + 0.25 A^2 = [[1.25, 1, 0.25], [1, 1.5, 1], [0.25, 1, 1.25]]

and eigenvalues of A are {-sqrt(2), 0, sqrt(2)}, so the largest eigenvalue of
H^2 is (1 + sqrt(2)/2)^2 = 1.5 + sqrt(2).
"""

import numpy as np
import pytest

from topotrack import (
    FilterSpec,
    build_filter,
    ensemble_covariance,
    frequency_response,
    generate,
    load_signals_csv,
    sample_covariance,
    save_signals_csv,
)

P3_COV_EXPECTED = np.array([[1.25, 1.0, 0.25],
                            [1.0, 1.5, 1.0],
                            [0.25, 1.0, 1.25]])


def test_filter_spec_order_is_polynomial_degree():
    assert FilterSpec((1.0, 0.5)).order == 1
    assert FilterSpec((2.0,)).order == 0


def test_filter_spec_rejects_empty():
    with pytest.raises(ValueError):
        FilterSpec(())


def test_filter_spec_random_deterministic():
    a = FilterSpec.random(order=3, seed=5)
    b = FilterSpec.random(order=3, seed=5)
    assert a.coeffs == b.coeffs
    assert len(a.coeffs) == 4  # degree 3 means 4 taps
    assert all(0.0 <= c <= 1.0 for c in a.coeffs)


def test_build_filter_matches_matrix_power_oracle(rng):
    adj = rng.uniform(0, 1, (6, 6))
    adj = np.triu(adj, 1)
    adj = adj + adj.T
    coeffs = (0.3, -0.2, 0.7, 0.1)
    direct = sum(c * np.linalg.matrix_power(adj, k) for k, c in enumerate(coeffs))
    np.testing.assert_allclose(build_filter(adj, FilterSpec(coeffs)), direct,
                               rtol=0, atol=1e-12)


def test_build_filter_p3_frozen(p3, p3_filter):
    h = build_filter(p3.adjacency, p3_filter)
    np.testing.assert_allclose(h, np.eye(3) + 0.5 * p3.adjacency, atol=1e-15)


def test_build_filter_warns_on_excess_taps(p3):
    with pytest.warns(UserWarning, match="redundant"):
        build_filter(p3.adjacency, FilterSpec((1.0, 0.1, 0.1, 0.1)))


def test_ensemble_covariance_p3_frozen(p3, p3_filter):
    np.testing.assert_allclose(ensemble_covariance(p3.adjacency, p3_filter),
                               P3_COV_EXPECTED, atol=1e-14)


def test_ensemble_covariance_commutes_with_shift(p3, p3_cov):
    comm = p3.adjacency @ p3_cov - p3_cov @ p3.adjacency
    assert np.abs(comm).max() < 1e-13


def test_ensemble_covariance_top_eigenvalue(p3_cov):
    lam = np.linalg.eigvalsh(p3_cov)[-1]
    assert lam == pytest.approx(1.5 + np.sqrt(2.0), abs=1e-12)


def test_frequency_response_matches_filter_eigenvalues(p3, p3_filter):
    evals, evecs = np.linalg.eigh(p3.adjacency)
    resp = frequency_response(evals, p3_filter)
    h = build_filter(p3.adjacency, p3_filter)
    np.testing.assert_allclose(evecs.T @ h @ evecs, np.diag(resp), atol=1e-12)


def test_generate_shapes_and_determinism(p3, p3_filter):
    a = generate(p3.adjacency, p3_filter, 50, seed=9)
    b = generate(p3.adjacency, p3_filter, 50, seed=9)
    assert a.signals.shape == (50, 3)
    assert a.t_count == 50 and a.n == 3
    np.testing.assert_array_equal(a.signals, b.signals)
    c = generate(p3.adjacency, p3_filter, 50, seed=10)
    assert (a.signals != c.signals).any()


def test_generate_sample_covariance_converges(p3, p3_filter, p3_cov):
    batch = generate(p3.adjacency, p3_filter, 200000, seed=0)
    hat = sample_covariance(batch.signals)
    assert np.abs(hat - p3_cov).max() < 0.05


def test_signals_csv_round_trip(tmp_path, p3, p3_filter):
    batch = generate(p3.adjacency, p3_filter, 32, seed=4)
    path = tmp_path / "signals.csv"
    save_signals_csv(path, batch)
    back = load_signals_csv(path)
    np.testing.assert_array_equal(back.signals, batch.signals)


def test_signals_csv_deterministic_bytes(tmp_path, p3, p3_filter):
    batch = generate(p3.adjacency, p3_filter, 16, seed=4)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    save_signals_csv(first, batch)
    save_signals_csv(second, batch)
    assert first.read_bytes() == second.read_bytes()
