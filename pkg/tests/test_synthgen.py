import numpy as np
import pytest
from scipy import stats

from trailbayes.synthgen import (DirectedGraph, GeneratorConfig, popularity_walk, price_network, read_directed_graph,
                                 softmax_weights, structural_walk, teleportation_walk, write_graph)


@pytest.fixture(scope="module")
def desk():
    cfg = GeneratorConfig(n_nodes=1000, n_trails=300, seed=5)
    return cfg, price_network(cfg)


def test_clique_only():
    g = price_network(GeneratorConfig(n_nodes=11))
    assert g.n_edges == 110
    assert np.all(g.in_degrees == 10)
    assert not any(u == v for u, v in g.edges())


def test_edge_count_formula_full_scale():
    cfg = GeneratorConfig()
    g = price_network(cfg)
    assert g.n == 10_000
    assert g.n_edges == 11 * 10 + (10_000 - 11) * 10 == 100_000
    assert np.all(g.out_degrees[11:] == 10)


def test_new_nodes_link_distinct_older_nodes(desk):
    _, g = desk
    for v in range(11, g.n):
        nb = g.out_neighbors(v)
        assert len(set(nb.tolist())) == 10
        assert nb.max() < v
    assert g.in_degrees.sum() == g.n_edges


def test_heavy_tail(desk):
    _, g = desk
    deg = g.in_degrees
    assert deg.max() > 8 * np.median(deg)


def test_seed_reproducible(desk):
    cfg, g = desk
    g2 = price_network(cfg)
    np.testing.assert_array_equal(g.targets, g2.targets)
    assert structural_walk(g, cfg) == structural_walk(g2, cfg)
    assert popularity_walk(g, cfg) == popularity_walk(g2, cfg)
    assert teleportation_walk(g.n, cfg) == teleportation_walk(g.n, cfg)


def test_single_choice_walk():
    g = DirectedGraph.from_lists([[1], [0]])
    cfg = GeneratorConfig(n_nodes=11, n_trails=1, trail_length=2)
    assert structural_walk(g, cfg, start=0) == [["0", "1"]]


@pytest.mark.parametrize("walk", [structural_walk, popularity_walk])
def test_walks_follow_edges(desk, walk):
    cfg, g = desk
    trails = walk(g, cfg)
    assert len(trails) == 300 and all(len(t) == 5 for t in trails)
    edges = set(g.edges())
    for t in trails:
        for a, b in zip(t, t[1:]):
            assert (int(a), int(b)) in edges


def test_softmax_weights():
    w = softmax_weights(np.array([0.0, 10 * np.log(2)]), 10.0)
    np.testing.assert_allclose(w, [1 / 3, 2 / 3])
    np.testing.assert_allclose(softmax_weights(np.array([4, 4, 4]), 10.0), [1 / 3] * 3)
    assert np.all(np.isfinite(softmax_weights(np.array([1e6, 1e6 + 10]), 10.0)))


def test_popularity_walk_step_distribution():
    # node 0 links to 1 (in-degree 0 apart from this link) and 2 (many in-links)
    adj = [[1, 2], [0], [0]] + [[2] for _ in range(6)]
    g = DirectedGraph.from_lists(adj)
    cfg = GeneratorConfig(n_nodes=11, n_trails=20_000, trail_length=2, temperature=10.0, seed=3)
    trails = popularity_walk(g, cfg, start=0)
    share = np.mean([t[1] == "2" for t in trails])
    d = g.in_degrees
    expected = np.exp(d[2] / 10) / (np.exp(d[1] / 10) + np.exp(d[2] / 10))
    assert share == pytest.approx(expected, abs=4 * np.sqrt(expected * (1 - expected) / 20_000))


def test_teleport_two_nodes_alternate():
    cfg = GeneratorConfig(n_nodes=11, n_trails=10, trail_length=6)
    for t in teleportation_walk(2, cfg):
        assert all(a != b for a, b in zip(t, t[1:]))


def test_teleport_uniform_chi_square():
    n = 50
    cfg = GeneratorConfig(n_nodes=11, n_trails=25_000, trail_length=5, seed=17)
    trails = teleportation_walk(n, cfg)
    nxt = np.array([int(b) for t in trails for b in t[1:]])
    assert nxt.size == 100_000
    assert all(a != b for t in trails for a, b in zip(t, t[1:]))
    observed = np.bincount(nxt, minlength=n)
    assert stats.chisquare(observed).pvalue > 1e-3
    expected = nxt.size / n
    assert np.all(np.abs(observed - expected) < 5 * np.sqrt(expected))


def test_teleport_self_flag():
    cfg = GeneratorConfig(n_nodes=11, n_trails=2000, trail_length=5, teleport_self=True)
    trails = teleportation_walk(3, cfg)
    assert any(a == b for t in trails for a, b in zip(t, t[1:]))


@pytest.mark.parametrize("kwargs", [dict(clique_size=10), dict(n_nodes=5), dict(trail_length=1),
                                    dict(temperature=0.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        GeneratorConfig(**kwargs)


def test_graph_file_roundtrip(tmp_path, desk):
    _, g = desk
    write_graph(tmp_path / "g.tsv", g)
    g2 = read_directed_graph(tmp_path / "g.tsv")
    np.testing.assert_array_equal(g.targets, g2.targets)
    np.testing.assert_array_equal(g.indptr, g2.indptr)
