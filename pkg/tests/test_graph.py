import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_laplacian, dense_normalized_adjacency, random_graph
from svga.graph import (
    GraphError,
    build_graph,
    gmrf_information_matrix,
    gmrf_unnormalized_density,
    normalized_adjacency,
    read_edge_list,
    write_edge_list,
)


def test_build_graph_dedups_and_drops_self_loops():
    g = build_graph([(0, 1), (1, 0), (2, 2)], 3)
    assert g.num_edges == 1
    assert tuple(g.edges[0]) == (0, 1)
    assert g.degrees.tolist() == [1, 1, 0]
    assert g.csr.nnz == 2


def test_path_degrees(path3):
    assert path3.degrees.tolist() == [1, 2, 1]


def test_csr_sorted_and_symmetric(rng):
    g = random_graph(rng, 12)
    assert g.csr.has_sorted_indices
    assert (g.csr != g.csr.T).nnz == 0
    assert g.csr.diagonal().sum() == 0


@pytest.mark.parametrize("edges,n", [([(0, 3)], 3), ([(-1, 0)], 2), ([], 0)])
def test_build_graph_errors(edges, n):
    with pytest.raises(GraphError):
        build_graph(edges, n)


def test_normalized_adjacency_single_edge():
    a = normalized_adjacency(build_graph([(0, 1)], 2)).toarray()
    np.testing.assert_allclose(a, [[0.5, 0.5], [0.5, 0.5]])


def test_normalized_adjacency_isolated_node():
    a = normalized_adjacency(build_graph([], 1)).toarray()
    assert a.tolist() == [[1.0]]


def test_normalized_adjacency_path(path3):
    a = normalized_adjacency(path3)
    assert a[0, 1] == pytest.approx(1 / np.sqrt(2 * 3), abs=1e-15)
    np.testing.assert_allclose(a.toarray(), dense_normalized_adjacency(path3), atol=1e-15)


def test_normalized_adjacency_pattern(rng):
    g = random_graph(rng, 15)
    a = normalized_adjacency(g)
    pattern = (g.csr + np.eye(g.n)) != 0
    assert np.array_equal(a.toarray() != 0, np.asarray(pattern))
    assert np.all(a.diagonal() > 0)


def test_information_matrix_single_edge():
    k = gmrf_information_matrix(build_graph([(0, 1)], 2)).toarray()
    np.testing.assert_allclose(k, [[1, -1], [-1, 1]])


def test_information_matrix_isolated_node():
    k = gmrf_information_matrix(build_graph([(0, 1)], 3)).toarray()
    assert k[2].tolist() == [0.0, 0.0, 1.0]


def test_information_matrix_psd_random():
    rng = np.random.default_rng(10)
    g = random_graph(rng, 10)
    k = gmrf_information_matrix(g).toarray()
    np.testing.assert_allclose(k, dense_laplacian(g), atol=1e-15)
    assert np.linalg.eigvalsh(k).min() >= -1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 14), st.floats(0.05, 0.9), st.integers(0, 2**31))
def test_graph_matrices_properties(n, p, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p)
    a = normalized_adjacency(g).toarray()
    k = gmrf_information_matrix(g)
    kd = k.toarray()
    np.testing.assert_array_equal(a, a.T)
    np.testing.assert_array_equal(kd, kd.T)
    z = rng.normal(size=(n, 100))
    assert np.min(np.sum(z * (kd @ z), axis=0)) >= -1e-9
    off = kd - np.diag(np.diag(kd))
    assert np.array_equal(off != 0, g.csr.toarray() != 0)
    deg = g.degrees
    np.testing.assert_array_equal(np.diag(kd)[deg > 0], 1.0)


def test_density_zero():
    k = gmrf_information_matrix(build_graph([(0, 1)], 2))
    assert gmrf_unnormalized_density(k, 0.1, np.zeros(2)) == 0.0


def test_density_two_node_hand_value():
    k = gmrf_information_matrix(build_graph([(0, 1)], 2))
    val = gmrf_unnormalized_density(k, 0.1, np.array([1.0, 1.0]))
    assert val == pytest.approx(-0.1, abs=1e-12)
    kj = k.toarray() + 0.1 * np.eye(2)
    assert val == pytest.approx(-0.5 * np.ones(2) @ kj @ np.ones(2), abs=1e-12)


def test_density_matches_gaussian_exponent(rng):
    for _ in range(20):
        g = random_graph(rng, int(rng.integers(2, 16)))
        k = gmrf_information_matrix(g)
        z = rng.normal(size=g.n)
        j = float(rng.uniform(1e-3, 1))
        quad = -0.5 * z @ (k.toarray() + j * np.eye(g.n)) @ z
        assert abs(gmrf_unnormalized_density(k, j, z) - quad) < 1e-9


def test_density_errors():
    k = gmrf_information_matrix(build_graph([(0, 1)], 2))
    with pytest.raises(ValueError):
        gmrf_unnormalized_density(k, 0.0, np.zeros(2))
    with pytest.raises(ValueError):
        gmrf_unnormalized_density(k, 0.1, np.array([np.nan, 0.0]))


def test_edge_list_roundtrip(tmp_path, rng):
    g = random_graph(rng, 9)
    p = tmp_path / "edges.tsv"
    write_edge_list(g, p)
    g2 = read_edge_list(p, n=9)
    np.testing.assert_array_equal(g.edges, g2.edges)


def test_edge_list_comments_and_errors(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("# header\n0\t1\r\n1\t2\n")
    g = read_edge_list(p)
    assert g.n == 3 and g.num_edges == 2
    p.write_text("0\t1\n0 2\n")
    with pytest.raises(GraphError, match=":2:"):
        read_edge_list(p)


def test_subgraph(path3):
    sub = path3.subgraph([1, 2])
    assert sub.n == 2 and sub.edges.tolist() == [[0, 1]]
