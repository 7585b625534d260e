"""Adjacency validation, edge-list round trips, and constraint handling."""

import numpy as np
import pytest

from topotrack import (
    EdgeConstraints,
    GroundTruth,
    init_sparse_random,
    load_edge_list,
    save_edge_list,
    support,
    validate,
)


def test_validate_accepts_admissible(p3):
    assert validate(p3.adjacency) == []


def test_validate_flags_each_defect():
    bad = np.array([[1.0, -2.0], [3.0, 0.0]])
    joined = " ".join(validate(bad))
    assert "symmetry" in joined
    assert "hollowness" in joined
    assert "non-negativity" in joined


def test_validate_rejects_nonsquare():
    with pytest.raises(ValueError, match="dimension error"):
        validate(np.zeros((2, 3)))


def test_init_sparse_random_is_admissible_and_deterministic():
    a = init_sparse_random(25, density=0.2, seed=7)
    b = init_sparse_random(25, density=0.2, seed=7)
    assert validate(a) == []
    np.testing.assert_array_equal(a, b)
    assert (a != init_sparse_random(25, density=0.2, seed=8)).any()


def test_support_strictly_above_threshold():
    mat = np.array([[0.0, 0.5, 0.1], [0.5, 0.0, 0.0], [0.1, 0.0, 0.0]])
    assert support(mat, 0.1) == {(0, 1)}
    assert support(mat, 0.0) == {(0, 1), (0, 2)}


def test_edge_list_round_trip(tmp_path, p3):
    path = tmp_path / "g.edges"
    save_edge_list(path, p3.adjacency, header="test graph")
    back = load_edge_list(path)
    np.testing.assert_allclose(back, p3.adjacency)


def test_edge_list_one_based_round_trip(tmp_path, karate):
    path = tmp_path / "k.edges"
    save_edge_list(path, karate.adjacency, index_base=1)
    with open(path) as fh:
        data = [ln.split() for ln in fh if not ln.startswith("#")]
    assert min(min(int(i), int(j)) for i, j, _ in data) >= 1
    back = load_edge_list(path, index_base=1)
    np.testing.assert_allclose(back, karate.adjacency)


def test_edge_list_keeps_isolated_vertices(tmp_path):
    mat = np.zeros((5, 5))
    mat[0, 1] = mat[1, 0] = 1.0  # vertices 2..4 have no edges
    path = tmp_path / "iso.edges"
    save_edge_list(path, mat)
    back = load_edge_list(path)
    assert back.shape == (5, 5)
    np.testing.assert_allclose(back, mat)
    assert load_edge_list(path, n=7).shape == (7, 7)  # explicit n wins


def test_edge_list_weights_survive(tmp_path):
    mat = np.zeros((4, 4))
    mat[0, 3] = mat[3, 0] = 0.123456789012345
    path = tmp_path / "w.edges"
    save_edge_list(path, mat)
    np.testing.assert_array_equal(load_edge_list(path), mat)


def test_load_edge_list_rejects_garbage(tmp_path):
    path = tmp_path / "bad.edges"
    path.write_text("0 1 not-a-number\n")
    with pytest.raises(ValueError, match="data error"):
        load_edge_list(path)


def test_ground_truth_from_edge_list(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("0 2 1.5\n1 2\n")
    truth = GroundTruth.from_edge_list(path)
    assert truth.n == 3
    assert truth.edges == {(0, 2), (1, 2)}
    assert truth.adjacency[0, 2] == 1.5
    assert truth.adjacency[1, 2] == 1.0


def test_constraints_apply_clamps_symmetrically():
    cons = EdgeConstraints({(0, 1): 0.7})
    mat = np.zeros((3, 3))
    out = cons.apply(mat)
    assert out[0, 1] == 0.7
    assert out[1, 0] == 0.7


def test_constraints_random_edges_subset_of_truth(karate):
    cons = EdgeConstraints.random_edges(karate, 5, seed=3)
    assert len(cons) == 5
    for (i, j), w in cons.items():
        assert (i, j) in karate.edges
        assert w == karate.adjacency[i, j]
    again = EdgeConstraints.random_edges(karate, 5, seed=3)
    assert set(cons.pairs) == set(again.pairs)


def test_constraints_from_file(tmp_path):
    path = tmp_path / "known.edges"
    path.write_text("# known\n0 1 0.5\n2 3\n")
    cons = EdgeConstraints.from_file(path)
    assert dict(cons.items()) == {(0, 1): 0.5, (2, 3): 1.0}
    assert cons.max_index() == 3
