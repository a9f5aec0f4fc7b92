import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from quadba import expander
from quadba.expander import (ExpanderError, InstanceTooLarge, build, from_edges, make_rng,
                             min_degree, random_perfect_matching, verify_expansion)


def _bound(c, d):
    # direct evaluation of (e/c)^c (e/(1-c))^(1-c) (1-c)^(cd/2), no logs
    return (math.e / c) ** c * (math.e / (1 - c)) ** (1 - c) * (1 - c) ** (c * d / 2)


def _oracle_degree(eps):
    c = 2 * eps
    d = 1
    while _bound(c, d) >= 1:
        d += 1
    return d


@pytest.mark.parametrize("eps", [0.25, 0.2, 0.125, 0.1, 0.05, 0.3, 0.45])
def test_min_degree_matches_direct_evaluation(eps):
    d = min_degree(eps)
    assert d == _oracle_degree(eps)
    assert _bound(2 * eps, d) < 1 <= _bound(2 * eps, d - 1)


def test_min_degree_quarter():
    assert _oracle_degree(0.25) == 10
    assert min_degree(0.25) == 10


def test_min_degree_decreases_toward_half():
    degrees = [min_degree(e) for e in (0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49)]
    assert degrees == sorted(degrees, reverse=True)


@pytest.mark.parametrize("eps", [0, 0.5, -0.1, 0.7])
def test_min_degree_rejects_out_of_range(eps):
    with pytest.raises(ExpanderError):
        min_degree(eps)


def test_matching_even():
    edges = random_perfect_matching(4, make_rng(1))
    assert len(edges) == 2
    assert sorted(v for e in edges for v in e) == [0, 1, 2, 3]


def test_matching_odd_gives_vertex_zero_two_edges():
    edges = random_perfect_matching(5, make_rng(3))
    assert len(edges) == 3
    counts = [sum(v in e for e in edges) for v in range(5)]
    assert counts == [2, 1, 1, 1, 1]


def test_matching_deterministic():
    assert random_perfect_matching(10, make_rng(7)) == random_perfect_matching(10, make_rng(7))


@given(st.integers(2, 40), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_matching_covers_every_vertex(n, seed):
    edges = random_perfect_matching(n, make_rng(seed))
    assert len(edges) == (n + 1) // 2
    assert all(a != b for a, b in edges)
    deg = [sum(v in e for e in edges) for v in range(n)]
    assert deg[1:] == [1] * (n - 1)
    assert deg[0] == (2 if n % 2 else 1)


def test_complete_graph_expands():
    k5 = from_edges(5, itertools.combinations(range(5), 2))
    assert verify_expansion(k5, 0.4, 0.6)


def _brute(g, alpha, beta, closed=False):
    k = math.ceil(alpha * g.n)
    for s in itertools.combinations(range(g.n), k):
        nb = set().union(*(g.neighbors(v) for v in s))
        if closed:
            nb |= set(s)
        if not len(nb) > beta * g.n:
            return False
    return True


def test_cycle_does_not_expand():
    c8 = from_edges(8, [(i, (i + 1) % 8) for i in range(8)])
    assert _brute(c8, 0.25, 0.75) is False
    assert verify_expansion(c8, 0.25, 0.75) is False


def test_instance_too_large():
    g = from_edges(30, [(i, (i + 1) % 30) for i in range(30)])
    with pytest.raises(InstanceTooLarge):
        verify_expansion(g, 0.5, 0.5, budget=10**6)


def test_alpha_beta_checked():
    g = from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(ExpanderError):
        verify_expansion(g, 0.6, 0.5)


@given(st.integers(3, 11), st.integers(0, 10**6), st.sampled_from([(0.25, 0.5), (0.5, 0.5), (0.3, 0.6)]),
       st.booleans())
@settings(max_examples=80, deadline=None)
def test_verify_matches_brute_force(n, seed, ab, closed):
    rng = make_rng(seed)
    edges = [e for _ in range(2) for e in random_perfect_matching(n, rng)]
    g = from_edges(n, edges)
    assert verify_expansion(g, *ab, closed=closed) == _brute(g, *ab, closed=closed)


def test_build_small_graph_degree():
    g = build(6, 0.25, seed=0)
    assert g.degree == 10
    assert all(len(g.neighbors(v)) <= min(5, 10) for v in range(6))
    assert all(v not in g.neighbors(v) for v in range(6))


def test_build_two_vertices():
    g = build(2, 0.25, seed=0)
    assert g.neighbors(0) == {1} and g.neighbors(1) == {0}


def test_build_sixteen_verifies():
    g = build(16, 0.25, seed=5)
    assert g.verified == "full"
    assert _brute(g, 0.5, 0.5)


def test_build_deterministic():
    assert build(12, 0.25, seed=9) == build(12, 0.25, seed=9)


def test_build_large_uses_sampling():
    g = build(40, 0.25, seed=1)
    assert g.verified == "sampled"


def test_report_shape():
    rep = expander.report(8, 0.25, 1)
    assert set(rep) == {"n", "epsilon", "d", "max_neighbors", "verified", "retries"}
    assert rep["d"] == 10 and rep["verified"] == "full"
