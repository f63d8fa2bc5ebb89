import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import inclusion_by_enumeration, random_connected_graph
from wtagraph.errors import ContractError, GraphError
from wtagraph.graph import (Graph, cutsize, effective_resistances, expected_tree_cutsize, load_graph,
                            load_labels, phi_edges, resistance_matrix, tree_resistance_distance,
                            weighted_cutsize, write_graph, write_labels)
from wtagraph.trees import tree_from_graph


def triangle(w=(1.0, 1.0, 2.0)):
    return Graph(3, [0, 1, 0], [1, 2, 2], w)


def test_unit_triangle_resistances():
    rt = effective_resistances(triangle((1.0, 1.0, 1.0)))
    np.testing.assert_allclose(rt.r, 2 / 3, atol=1e-12)
    np.testing.assert_allclose(rt.p, 2 / 3, atol=1e-12)


def test_weighted_triangle_inclusion():
    # trees {01,12}: 1, {01,02}: 2, {12,02}: 2  -> p01 = 3/5, p12 = 3/5, p02 = 4/5
    rt = effective_resistances(triangle())
    np.testing.assert_allclose(rt.p, [0.6, 0.6, 0.8], atol=1e-12)
    assert abs(rt.p.sum() - 2) < 1e-12


def test_bridge_has_probability_one():
    g = Graph(6, [0, 1, 0, 2, 3, 4, 3], [1, 2, 2, 3, 4, 5, 5], np.ones(7))
    rt = effective_resistances(g)
    assert abs(rt.p[3] - 1.0) < 1e-12


def test_path_resistance_is_sum_of_reciprocals():
    g = Graph(4, [0, 1, 2], [1, 2, 3], [2.0, 4.0, 0.5])
    R = resistance_matrix(g)
    assert abs(R[0, 3] - (0.5 + 0.25 + 2.0)) < 1e-12
    t = tree_from_graph(g)
    assert abs(tree_resistance_distance(t, 0, 3) - 2.75) < 1e-12
    assert tree_resistance_distance(t, 2, 2) == 0.0


def test_enumeration_matches_on_random_graphs(rng):
    for _ in range(10):
        g = random_connected_graph(rng, int(rng.integers(3, 9)))
        rt = effective_resistances(g)
        np.testing.assert_allclose(rt.p, inclusion_by_enumeration(g), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_probabilities_sum_to_n_minus_one(n, seed):
    g = random_connected_graph(np.random.default_rng(seed), n)
    rt = effective_resistances(g)
    assert abs(rt.p.sum() - (n - 1)) < 1e-8
    assert np.all(rt.p > 0) and np.all(rt.p <= 1 + 1e-9)


def test_scaling_leaves_probabilities_unchanged(rng):
    g = random_connected_graph(rng, 10)
    base = effective_resistances(g).p
    for alpha in (1e-3, 1e3):
        np.testing.assert_allclose(effective_resistances(g.scaled(alpha)).p, base, atol=1e-9)


def test_disconnected_graph_rejected():
    g = Graph(4, [0, 2], [1, 3], [1.0, 1.0])
    assert not g.connected
    with pytest.raises(GraphError):
        effective_resistances(g)


def test_dense_cap():
    g = Graph(5, [0, 1, 2, 3], [1, 2, 3, 4], np.ones(4))
    with pytest.raises(GraphError, match="limited"):
        effective_resistances(g, max_nodes=4)


def test_ill_conditioned_rejected():
    g = Graph(3, [0, 1], [1, 2], [1e-12, 1e6])
    with pytest.raises(GraphError, match="ill-conditioned"):
        effective_resistances(g)


@pytest.mark.parametrize("text, msg", [
    ("0 1 1\n1 2 -1\n", "non-positive weight at line 2"),
    ("0 1 1\n1 2 0\n", "non-positive weight at line 2"),
    ("0 1\n", "malformed line 1"),
    ("0 0 1\n", "self-loop"),
    ("0 1 1\n1 0 2\n", "duplicate edge at line 2"),
    ("0 x 1\n", "malformed"),
    ("# nothing\n", "empty"),
])
def test_edge_list_errors(text, msg):
    with pytest.raises(GraphError, match=msg):
        load_graph(text)


def test_edge_list_roundtrip(tmp_path, rng):
    g = random_connected_graph(rng, 12)
    p = tmp_path / "g.el"
    write_graph(g, p)
    h = load_graph(str(p))
    assert h.n == g.n
    np.testing.assert_array_equal(h.u, g.u)
    np.testing.assert_array_equal(h.w, g.w)
    h2 = load_graph(io.StringIO(p.read_text()))
    np.testing.assert_array_equal(h2.v, g.v)


def test_missing_file_is_an_os_error():
    with pytest.raises(OSError):
        load_graph("does-not-exist.el")


def test_comments_and_blank_lines():
    g = load_graph("# header\n\n0 1 2.5  # trailing\n1 2 1\n")
    assert g.n == 3 and g.m == 2 and g.w[0] == 2.5


def test_labels(tmp_path):
    y = load_labels("0 +1\n2 -1\n", 4)
    np.testing.assert_array_equal(y, [1, 0, -1, 0])
    with pytest.raises(GraphError):
        load_labels("0 2\n", 3)
    with pytest.raises(GraphError):
        load_labels("5 1\n", 3)
    p = tmp_path / "y.txt"
    write_labels(y, p, header=["note: x"])
    np.testing.assert_array_equal(load_labels(str(p), 4), y)


def test_cutsizes():
    g = triangle()
    y = np.array([1, 1, -1])
    np.testing.assert_array_equal(phi_edges(g, y), [False, True, True])
    assert cutsize(g, y) == 2
    assert weighted_cutsize(g, y) == 3.0
    rt = effective_resistances(g)
    assert abs(expected_tree_cutsize(g, y, rt) - 1.4) < 1e-12
    with pytest.raises(ContractError):
        cutsize(g, [1, 0, 1])


def test_graph_validation():
    with pytest.raises(GraphError):
        Graph(2, [0], [1], [0.0])
    with pytest.raises(GraphError):
        Graph(2, [0], [2], [1.0])
    with pytest.raises(GraphError):
        Graph(3, [0, 1], [1, 0], [1.0, 1.0])
    g = triangle()
    assert g.edge_id(2, 1) == 1
    assert g.degree(0) == 2
    with pytest.raises(ValueError):
        g.w[0] = 3.0
