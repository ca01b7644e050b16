import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmgog.topology import Topology, candidate_edges, generate, matrix_norms, pagerank

from oracles import pagerank_dense


def random_topology(rng, n, p=0.4, split=None):
    edges = [(i, j, float(rng.uniform(0.5, 2))) for i, j in itertools.combinations(range(n), 2)
             if rng.random() < p]
    return Topology(n, split or max(1, n // 2), edges)


def test_candidate_edges_complete_graph():
    t = Topology(3, 1, [(0, 1), (0, 2), (1, 2)])
    assert candidate_edges(t) == []


def test_candidate_edges_path():
    t = Topology(3, 1, [(0, 1), (1, 2)])
    assert candidate_edges(t) == [(0, 2)]


def test_candidate_edges_count_matches_enumeration():
    rng = np.random.default_rng(0)
    t = random_topology(rng, 10)
    cand = candidate_edges(t)
    assert len(cand) == 45 - len(t.edges)
    present = {(i, j) for i, j, _ in t.edges}
    assert not present & set(cand)
    assert present | set(cand) == set(itertools.combinations(range(10), 2))


def test_norms_of_zero_matrix():
    nm = matrix_norms(np.zeros((4, 4)))
    assert (nm.one_norm, nm.two_norm, nm.l1_norm) == (0, 0, 0)


def test_norms_of_swap():
    nm = matrix_norms([[0, 1], [1, 0]])
    assert nm.one_norm == pytest.approx(1)
    assert nm.two_norm == pytest.approx(1)
    assert nm.l1_norm == pytest.approx(2)


def test_star_two_norm():
    a = np.zeros((3, 3))
    a[0, 1:] = a[1:, 0] = 1
    assert matrix_norms(a).two_norm == pytest.approx(np.sqrt(2), rel=1e-12)
    assert np.linalg.svd(a, compute_uv=False)[0] == pytest.approx(np.sqrt(2), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_norms_monotone_under_edge_addition(seed):
    rng = np.random.default_rng(seed)
    t = random_topology(rng, 7)
    cand = candidate_edges(t)
    if not cand:
        return
    i, j = cand[int(rng.integers(len(cand)))]
    b = t.adjacency.copy()
    b[i, j] = b[j, i] = rng.uniform(0.1, 2)
    before, after = matrix_norms(t.adjacency), matrix_norms(b)
    assert after.one_norm >= before.one_norm
    assert after.two_norm >= before.two_norm - 1e-12
    assert after.l1_norm > before.l1_norm


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_adjacency_rebuilt_from_edges(seed):
    rng = np.random.default_rng(seed)
    t = random_topology(rng, 8)
    rebuilt = np.zeros((8, 8))
    for i, j, w in t.edges:
        rebuilt[i, j] = rebuilt[j, i] = w
    np.testing.assert_array_equal(rebuilt, t.adjacency)
    assert np.all(np.diag(t.adjacency) == 0)
    same = Topology.from_adjacency(t.adjacency, t.split_index)
    assert same.edges == t.edges


def test_invalid_topologies_rejected():
    with pytest.raises(ValueError):
        Topology(3, 1, [(0, 0)])
    with pytest.raises(ValueError):
        Topology(3, 3, [(0, 1)])
    with pytest.raises(ValueError):
        Topology(3, 1, [(0, 1, 0.0)])


def test_document_round_trip_uses_one_based_indices():
    t = Topology(4, 2, [(0, 3, 2.0), (1, 2)])
    doc = t.to_document()
    assert [0 < e[0] <= 4 for e in doc["edges"]] == [True, True]
    assert Topology.from_document(doc) == t


def test_pagerank_two_nodes():
    np.testing.assert_allclose(pagerank(Topology(2, 1, [(0, 1)])), [0.5, 0.5], atol=1e-12)


def test_pagerank_star_center_dominates():
    pr = pagerank(Topology(4, 1, [(0, 1), (0, 2), (0, 3)]), damping=0.85)
    assert pr[0] > pr[1]
    assert pr[1] == pytest.approx(pr[2], abs=1e-14) and pr[2] == pytest.approx(pr[3], abs=1e-14)


def test_pagerank_matches_linear_solve():
    rng = np.random.default_rng(4)
    t = random_topology(rng, 6, p=0.5)
    pr = pagerank(t)
    assert pr.sum() == pytest.approx(1, abs=1e-12)
    assert np.all(pr > 0)
    np.testing.assert_allclose(pr, pagerank_dense(t.adjacency), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_pagerank_equivariant_under_relabeling(seed):
    rng = np.random.default_rng(seed)
    t = random_topology(rng, 7)
    perm = rng.permutation(7)
    A = t.adjacency[np.ix_(perm, perm)]
    np.testing.assert_allclose(pagerank(Topology.from_adjacency(A, 3)), pagerank(t)[perm], atol=1e-10)


def test_generator_is_connected_and_seeded():
    a = generate(11, 11, 0.2, 0.45, n_cross=3, seed=5)
    b = generate(11, 11, 0.2, 0.45, n_cross=3, seed=5)
    assert a == b
    assert a.is_connected()
    assert a.n_total == 22 and a.split_index == 11
    m = a.split_index
    assert np.count_nonzero(a.adjacency[:m, m:]) == 3
