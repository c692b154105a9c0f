from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from byzbandit.core import ConfigError
from byzbandit.topology import (DirectedGraph, ErRandomFixed, ErRandomPerRound, Fixed, MinDegreeConstrained,
                                budget_violations, degree_requirement_probability, er_adjacency, load_edge_list,
                                realize, repair_min_degree, validate_byzantine_budget)


def test_arc_direction_convention():
    g = DirectedGraph.from_edges(3, [(0, 1)])
    assert g.in_neighbors(1) == [0]
    assert g.out_neighbors(0) == [1]
    assert g.in_neighbors(0) == []


def test_symmetric_edges():
    g = DirectedGraph.from_edges(3, [(0, 1)], symmetric=True)
    assert g.in_neighbors(0) == [1]


def test_complete_graph_degrees():
    assert DirectedGraph.complete(5).in_degrees().tolist() == [4] * 5


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(-1, 1)]])
def test_bad_edges_rejected(edges):
    with pytest.raises(ConfigError):
        DirectedGraph.from_edges(3, edges)


def test_adjacency_is_read_only():
    g = DirectedGraph.complete(3)
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = False


def test_edge_list_file(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# ring\n0 1\n1 2  # trailing\n\n2 0\n")
    g = load_edge_list(path, 3)
    assert sorted(g.edges()) == [(0, 1), (1, 2), (2, 0)]
    path.write_text("0 1 2\n")
    with pytest.raises(ConfigError, match="line 1"):
        load_edge_list(path, 3)


@pytest.mark.parametrize("q", [0.0, -0.5, 1.01])
def test_q_range(q):
    with pytest.raises(ConfigError, match="graph.q"):
        ErRandomPerRound(q)


def test_q_one_gives_complete_graph():
    g = realize(ErRandomPerRound(1.0), 6, 0, np.random.default_rng(0))
    assert g == DirectedGraph.complete(6)


def test_realize_is_deterministic_per_stream():
    a = realize(ErRandomPerRound(0.5), 8, 3, np.random.default_rng(4))
    b = realize(ErRandomPerRound(0.5), 8, 3, np.random.default_rng(4))
    assert a == b
    assert realize(Fixed(a), 8, 10) is a


def test_er_edge_frequency():
    rng = np.random.default_rng(0)
    adj = er_adjacency(rng.random((400, 10, 10)), 0.3)
    off = adj[:, ~np.eye(10, dtype=bool)]
    assert off.mean() == pytest.approx(0.3, abs=0.01)
    assert not adj[:, np.arange(10), np.arange(10)].any()


@given(st.integers(2, 9), st.floats(0.05, 0.9), st.integers(0, 8), st.integers(0, 10_000))
def test_repair_reaches_min_degree_and_keeps_edges(n, q, d_min, seed):
    d_min = min(d_min, n - 1)
    rng = np.random.default_rng(seed)
    adj = er_adjacency(rng.random((n, n)), q)
    fixed = repair_min_degree(adj, rng.random((n, n)), d_min)
    deg = fixed.sum(axis=0)
    assert (deg >= d_min).all()
    assert (fixed | ~adj).all()
    assert (deg == np.maximum(adj.sum(axis=0), d_min)).all()
    assert not fixed.diagonal().any()


def test_min_degree_model_hits_target_mean():
    model = MinDegreeConstrained(4, 6.0)
    rng = np.random.default_rng(2)
    degs = [realize(model, 10, t, rng).in_degrees() for t in range(3000)]
    assert np.mean(degs) == pytest.approx(6.0, abs=0.05)
    assert np.min(degs) >= 4


def test_min_degree_validation():
    with pytest.raises(ConfigError):
        MinDegreeConstrained(4, 3.0).base_q(10)
    with pytest.raises(ConfigError):
        MinDegreeConstrained(12, 12.0).base_q(10)


def _closed_form(q):
    # independent evaluation through scipy's binomial survival function
    return float(stats.binom.sf(6, 9, q)) ** 10


@pytest.mark.parametrize("q", [0.3, 0.5, 0.8, 0.9, 0.95])
def test_degree_probability_ten_agents(q):
    assert degree_requirement_probability(q, 10, 2) == pytest.approx(_closed_form(q), rel=1e-12)


def test_degree_probability_edges():
    assert degree_requirement_probability(ErRandomPerRound(1.0), 10, 2) == 1.0
    assert degree_requirement_probability(0.9, 5, 2) == 0.0
    with pytest.raises(ConfigError):
        degree_requirement_probability(Fixed(DirectedGraph.complete(3)), 3, 0)


@given(st.floats(0.01, 1.0), st.integers(2, 12), st.integers(0, 3))
def test_degree_probability_is_a_probability(q, n, f):
    p = degree_requirement_probability(q, n, f)
    assert 0.0 <= p <= 1.0 + 1e-12
    if 3 * f + 1 <= n - 1:
        assert p <= degree_requirement_probability(min(1.0, q + 0.05), n, f) + 1e-12


def test_budget_check():
    g = DirectedGraph.complete(5)
    assert validate_byzantine_budget(g, [0], 1)
    assert not validate_byzantine_budget(g, [0, 1], 1)
    byz = np.array([True, True, False, False, False])
    assert budget_violations(g.adjacency, byz, 1).tolist() == [False, False, True, True, True]


def test_empty_byzantine_set_is_within_budget():
    assert validate_byzantine_budget(DirectedGraph.complete(4), [], 0)
    assert math.isclose(degree_requirement_probability(0.5, 2, 0), 0.25)
