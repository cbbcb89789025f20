from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leaktree.errors import InvalidNetworkError, PreconditionError
from leaktree.hydraulics import PipeGeometry
from leaktree.network import Network, validate
from leaktree.synthetic import random_tree_edges

GEOM = PipeGeometry(100.0, 0.2)

# k with branches a(b, c), d(e, f), g(h, i)
K, A, B, C, D, E, F, G, H, I = range(10)
FIG_TREE = [(K, A), (A, B), (A, C), (K, D), (D, E), (D, F), (K, G), (G, H), (G, I)]


def make(n, edges):
    return Network(n, [(i, j, GEOM) for i, j in edges])


def random_net(seed, n):
    rng = np.random.default_rng(seed)
    return make(n, random_tree_edges(rng, n))


def as_graph(net):
    g = nx.Graph()
    g.add_nodes_from(net.vertices)
    g.add_edges_from((p.start, p.end) for p in net.pipes)
    return g


def test_path_graph_is_valid():
    assert validate(3, [(0, 1), (1, 2)]) == []


def test_triangle_reports_cycle():
    problems = validate(3, [(0, 1), (1, 2), (2, 0)])
    assert any(p.startswith("cycle") for p in problems)
    assert any("2" in p for p in problems if p.startswith("cycle"))


def test_disjoint_edges_report_disconnected():
    problems = validate(4, [(0, 1), (2, 3)])
    assert any("disconnected" in p for p in problems)


@pytest.mark.parametrize(
    "n, edges, fragment",
    [
        (2, [(0, 0)], "self-loop"),
        (3, [(0, 1), (1, 0)], "parallel"),
        (2, [(0, 5)], "unknown vertex"),
        (1, [], "2 vertices"),
    ],
)
def test_other_violations(n, edges, fragment):
    problems = validate(n, edges)
    assert any(fragment in p for p in problems), problems


def test_constructor_raises_with_all_violations():
    with pytest.raises(InvalidNetworkError) as info:
        make(5, [(0, 1), (1, 2), (2, 0)])
    assert len(info.value.violations) >= 2


def test_two_vertex_network_has_two_leaves():
    net = make(2, [(1, 0)])
    assert net.leaves == (0, 1)
    assert net.pipes[0].start == 0 and net.pipes[0].end == 1


def test_path_trivial_and_star():
    net = make(4, [(0, 1), (0, 2), (0, 3)])
    assert net.path(2, 2) == [2]
    assert net.path(1, 3) == [1, 0, 3]
    with pytest.raises(KeyError):
        net.path(0, 9)


@pytest.mark.parametrize("seed", range(5))
def test_paths_match_graph_oracle(seed):
    net = random_net(seed, 30)
    g = as_graph(net)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        a, b = (int(v) for v in rng.integers(30, size=2))
        path = net.path(a, b)
        assert path == nx.shortest_path(g, a, b)
        assert path[0] == a and path[-1] == b
        assert len(set(path)) == len(path)
        assert all(g.has_edge(u, w) for u, w in zip(path, path[1:]))
        assert net.path(b, a) == path[::-1]


def test_subtrees_of_path_middle():
    net = make(3, [(0, 1), (1, 2)])
    assert net.subtrees_at(1) == [(0, frozenset({0, 1})), (2, frozenset({1, 2}))]
    with pytest.raises(PreconditionError):
        net.subtrees_at(0)


def test_subtrees_of_figure_tree():
    net = make(10, FIG_TREE)
    parts = dict(net.subtrees_at(K))
    assert parts == {
        A: frozenset({K, A, B, C}),
        D: frozenset({K, D, E, F}),
        G: frozenset({K, G, H, I}),
    }
    assert net.leaves == (B, C, E, F, H, I)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 40))
def test_subtrees_partition_the_vertices(seed, n):
    net = random_net(seed, n)
    for w in net.vertices:
        if net.is_leaf(w):
            continue
        parts = [s for _, s in net.subtrees_at(w)]
        assert frozenset().union(*parts) == frozenset(net.vertices)
        for s1, s2 in itertools.combinations(parts, 2):
            assert s1 & s2 == {w}
        # BFS oracle: removing w splits the graph into exactly these components
        g = as_graph(net)
        g.remove_node(w)
        comps = sorted(sorted(c | {w}) for c in nx.connected_components(g))
        assert comps == sorted(sorted(s) for s in parts)


def test_leaves_behind_examples():
    path = make(3, [(0, 1), (1, 2)])
    assert path.leaves_behind(1, 2) == (0,)
    star = make(4, [(0, 1), (0, 2), (0, 3)])
    assert star.leaves_behind(0, 1) == (2, 3)
    with pytest.raises(PreconditionError):
        star.leaves_behind(1, 2)


@pytest.mark.parametrize("seed", range(4))
def test_leaves_behind_brute_force(seed):
    net = random_net(100 + seed, 25)
    rng = np.random.default_rng(seed)
    for _ in range(50):
        p = net.pipes[int(rng.integers(len(net.pipes)))]
        s, t = (p.start, p.end) if rng.random() < 0.5 else (p.end, p.start)
        brute = tuple(v for v in net.leaves if t not in net.path(v, s))
        assert net.leaves_behind(s, t) == brute
        other = net.leaves_behind(t, s)
        assert set(brute) | set(other) == set(net.leaves)
        assert not set(brute) & set(other)


def test_neighbors_and_edge_ids():
    net = make(10, FIG_TREE)
    assert [w for w, _ in net.neighbors(K)] == [A, D, G]
    for k, p in enumerate(net.pipes):
        assert net.edge_id(p.end, p.start) == k
        assert p.other(p.start) == p.end
    with pytest.raises(PreconditionError):
        net.edge_id(B, I)
    assert net.degree(K) == 3
    assert net.leaf_pipe(B) == net.edge_id(A, B)


def test_numpy_integers_are_vertex_ids():
    net = make(3, [(0, 1), (1, 2)])
    assert net.path(np.int64(0), np.int32(2)) == [0, 1, 2]


def test_equality_and_hash():
    a = make(3, [(0, 1), (2, 1)])
    b = make(3, [(1, 0), (1, 2)])
    assert a == b and hash(a) == hash(b)
