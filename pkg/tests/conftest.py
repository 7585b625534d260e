"""Shared fixtures: tiny hand-checkable graphs and the karate-club dataset."""

import importlib.resources

import numpy as np
import pytest

from topotrack import FilterSpec, GroundTruth, ensemble_covariance


@pytest.fixture(scope="session")
def p3():
    """Path graph on 3 nodes: edges (0,1) and (1,2), unit weights."""
    adj = np.array([[0.0, 1.0, 0.0],
                    [1.0, 0.0, 1.0],
                    [0.0, 1.0, 0.0]])
    return GroundTruth(adjacency=adj)


@pytest.fixture(scope="session")
def p3_filter():
    """First-order filter H = I + 0.5 A on the path graph."""
    return FilterSpec((1.0, 0.5))


@pytest.fixture(scope="session")
def p3_cov(p3, p3_filter):
    """Exact output covariance H^2 of the path graph.

    Hand value: H^2 = I + A + 0.25 A^2 =
    [[1.25, 1, 0.25], [1, 1.5, 1], [0.25, 1, 1.25]].
    """
    return ensemble_covariance(p3.adjacency, p3_filter)


@pytest.fixture(scope="session")
def karate():
    """Zachary karate club: 34 nodes, 78 unit-weight edges."""
    path = importlib.resources.files("topotrack").joinpath("data/karate.edges")
    return GroundTruth.from_edge_list(str(path))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_covariance(n, seed, distinct_gap=0.0):
    """Random PSD covariance; with distinct_gap > 0 the eigenvalues are spread."""
    gen = np.random.default_rng(seed)
    if distinct_gap > 0:
        evals = 1.0 + distinct_gap * np.arange(n) + gen.uniform(0, distinct_gap / 3, n)
        q = np.linalg.qr(gen.standard_normal((n, n)))[0]
        return (q * evals) @ q.T
    a = gen.standard_normal((n, 2 * n))
    return a @ a.T / (2 * n)


def random_admissible(n, seed, density=0.4):
    """Random symmetric hollow non-negative matrix."""
    gen = np.random.default_rng(seed)
    mat = gen.uniform(0, 1, (n, n)) * (gen.uniform(0, 1, (n, n)) < density)
    mat = np.triu(mat, 1)
    return mat + mat.T
