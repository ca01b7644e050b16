import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmgog.attacker import (
    attacked_abscissa, best_single_edge, edge_score, lambda_shift_lower_bound, random_star_attack, run_hwa,
)
from fmgog.fm import FmParams, GainProfile, system_matrix
from fmgog.spectral import PerronPair, perron_vector
from fmgog.topology import Topology, candidate_edges, generate, matrix_norms

from oracles import dense_abscissa, exhaustive_best_edge


def random_instance(rng, n=None, uniform=False):
    n = n or int(rng.integers(5, 9))
    topo = generate(n // 2, n - n // 2, 0.6, 0.6, n_cross=1, seed=int(rng.integers(1 << 30)))
    params = FmParams(rng.uniform(0.5, 1, n), rng.uniform(0.5, 1.5, n), np.ones(n))
    if uniform:
        params = FmParams.uniform(n)
        gains = GainProfile(np.full(n, rng.uniform(4, 6)), np.full(n, rng.uniform(0.1, 0.9)))
    else:
        gains = GainProfile(rng.uniform(4, 6, n), rng.uniform(0.1, 0.9, n))
    return topo, params, gains


def test_uniform_score():
    n = 5
    params = FmParams.uniform(n)
    gains = GainProfile(np.ones(n), np.ones(n))
    perron = PerronPair(-1.0, np.full(n, 1 / np.sqrt(n)))
    for e in itertools.combinations(range(n), 2):
        assert edge_score(e, params, gains, perron) == pytest.approx(2 / n, rel=1e-14)


def test_score_is_first_order_eigenvalue_change():
    rng = np.random.default_rng(0)
    for _ in range(20):
        topo, params, gains = random_instance(rng)
        M = system_matrix(params, gains, topo.adjacency)
        perron = perron_vector(M)
        for e in candidate_edges(topo)[:5]:
            step = 1e-5
            up, down = topo.adjacency.copy(), topo.adjacency.copy()
            up[e] = up[e[::-1]] = step
            down[e] = down[e[::-1]] = -step
            fd = (dense_abscissa(system_matrix(params, gains, up))
                  - dense_abscissa(system_matrix(params, gains, down))) / (2 * step)
            assert edge_score(e, params, gains, perron) == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_score_rejects_self_pairs():
    params = FmParams.uniform(2)
    gains = GainProfile(np.ones(2), np.ones(2))
    perron = perron_vector(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        edge_score((1, 1), params, gains, perron)


def test_greedy_first_edge_matches_exhaustive_search():
    rng = np.random.default_rng(1)
    hits = trials = 0
    while trials < 50:
        topo, params, gains = random_instance(rng, n=5, uniform=True)
        if not candidate_edges(topo):
            continue
        trials += 1
        state = run_hwa(params, topo, gains, 1.0, 100.0)
        vals = exhaustive_best_edge(lambda B: system_matrix(params, gains, B), topo.adjacency)
        best = max(vals.values())
        got = vals[state.added[0][0]]
        hits += got >= best - 1e-9 * max(1.0, abs(best))
    assert hits >= 45


def test_single_missing_edge():
    edges = [e for e in itertools.combinations(range(4), 2) if e != (1, 3)]
    topo = Topology(4, 2, edges)
    params = FmParams.uniform(4)
    gains = GainProfile(np.full(4, 5.0), np.full(4, 0.2))
    big = run_hwa(params, topo, gains, 10.0, 10.0)
    assert big.rows() == [(1, 3, 1.0)]
    assert big.exhausted
    small = run_hwa(params, topo, gains, 0.5, 10.0)
    assert small.rows() == [(1, 3, pytest.approx(0.5, abs=1e-12))]


def test_star_with_fractional_last_edge():
    # path graph: node 0 has four non-neighbours
    topo = Topology(6, 3, [(i, i + 1) for i in range(5)])
    params = FmParams.uniform(6)
    gains = GainProfile(np.full(6, 5.0), np.full(6, 0.5))
    state = run_hwa(params, topo, gains, 2.25, 100.0)
    weights = [w for _, w in state.added]
    assert weights[:2] == [1.0, 1.0]
    assert weights[2] == pytest.approx(0.25, abs=1e-12)
    assert len(weights) == 3
    assert matrix_norms(state.a_q).one_norm == pytest.approx(2.25, abs=1e-9)
    src = set.intersection(*[set(e) for e, _ in state.added])
    assert len(src) == 1


def test_two_norm_can_bind():
    topo = Topology(6, 3, [(i, i + 1) for i in range(5)])
    params = FmParams.uniform(6)
    gains = GainProfile(np.full(6, 5.0), np.full(6, 0.5))
    state = run_hwa(params, topo, gains, 100.0, 1.5)
    nm = state.norms
    assert nm.two_norm == pytest.approx(1.5, abs=1e-9)
    assert nm.one_norm <= 100.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_hwa_output_properties(seed):
    rng = np.random.default_rng(seed)
    topo, params, gains = random_instance(rng)
    q1, q2 = rng.uniform(0.5, 3), rng.uniform(0.5, 3)
    state = run_hwa(params, topo, gains, q1, q2)
    nm = state.norms
    assert nm.one_norm <= q1 + 1e-9 and nm.two_norm <= q2 + 1e-9
    if not state.exhausted:
        assert min(q1 - nm.one_norm, q2 - nm.two_norm) <= 1e-9
    # single-source geometry
    assert nm.one_norm == pytest.approx(0.5 * nm.l1_norm, rel=1e-12, abs=1e-15)
    w = np.array([w for _, w in state.added])
    if len(w) > 1:
        assert nm.two_norm == pytest.approx(np.sqrt(np.sum(w ** 2)), rel=1e-9)
    path = state.abscissa_path
    assert all(b >= a - 1e-12 for a, b in zip(path, path[1:]))
    again = run_hwa(params, topo, gains, q1, q2)
    assert again.rows() == state.rows()


def test_bound_exact_without_attack():
    rng = np.random.default_rng(2)
    topo, params, gains = random_instance(rng)
    perron = perron_vector(system_matrix(params, gains, topo.adjacency))
    n = topo.n_total
    assert lambda_shift_lower_bound(params, gains, np.zeros((n, n)), perron) == perron.value


def test_bound_tight_on_symmetric_pair():
    topo = Topology(3, 1, [(0, 1), (1, 2)])
    params = FmParams.uniform(3)
    gains = GainProfile(np.ones(3), np.full(3, 0.3))
    perron = perron_vector(system_matrix(params, gains, topo.adjacency))
    a_q = np.zeros((3, 3))
    a_q[0, 2] = a_q[2, 0] = 0.7
    # the end nodes stay symmetric, so the Perron vector keeps its direction
    truth = attacked_abscissa(params, topo, gains, a_q)
    bound = lambda_shift_lower_bound(params, gains, a_q, perron)
    assert bound <= truth + 1e-12
    two = Topology(2, 1, [])
    p2 = FmParams.uniform(2)
    g2 = GainProfile(np.ones(2), np.full(2, 0.4))
    a2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    # without edges the dominant eigenvalue -1 is double; the symmetric vector is the relevant one
    pr = PerronPair(-1.0, np.full(2, 1 / np.sqrt(2)))
    assert lambda_shift_lower_bound(p2, g2, a2, pr) == pytest.approx(attacked_abscissa(p2, two, g2, a2), abs=1e-12)


def test_best_single_edge_matches_dense_search():
    rng = np.random.default_rng(3)
    topo, params, gains = random_instance(rng, n=6)
    edge, val = best_single_edge(params, topo, gains)
    vals = exhaustive_best_edge(lambda B: system_matrix(params, gains, B), topo.adjacency)
    assert val == pytest.approx(max(vals.values()), abs=1e-9)
    assert vals[edge] == pytest.approx(val, abs=1e-9)


def test_random_star_respects_norms():
    rng = np.random.default_rng(4)
    topo = generate(3, 3, 0.5, 0.5, n_cross=1, seed=1)
    for _ in range(50):
        a_q = random_star_attack(topo, 2.25, 1.3, rng)
        nm = matrix_norms(a_q)
        assert nm.one_norm <= 2.25 + 1e-12 and nm.two_norm <= 1.3 + 1e-12
        assert min(2.25 - nm.one_norm, 1.3 - nm.two_norm) <= 1e-12
        assert np.all(a_q[topo.adjacency > 0] == 0)
