"""Greedy worst-case adding-edge attacker.

The attacker adds symmetric edges that are absent from the nominal graph.
Each step picks the candidate with the largest first-order increase of the
dominant eigenvalue, computed from the Perron vector of the currently
compromised system.  After the first edge every further edge must share an
endpoint with the previous ones, so the attack is a star around one source.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.optimize import brentq

from .fm import FmParams, GainProfile, system_matrix
from .spectral import PerronPair, perron_vector, spectral_abscissa
from .topology import Topology, candidate_edges, matrix_norms

Edge = tuple[int, int]


@dataclasses.dataclass
class AttackState:
    a_q: np.ndarray
    sources: frozenset[int]
    added: list[tuple[Edge, float]]
    last_edge: Edge | None = None
    exhausted: bool = False  # candidates ran out before a norm bound was reached
    abscissa_path: list[float] = dataclasses.field(default_factory=list)

    @property
    def norms(self):
        return matrix_norms(self.a_q)

    def rows(self) -> list[tuple[int, int, float]]:
        return [(i, j, w) for (i, j), w in self.added]


def _row_scale(params: FmParams, gains: GainProfile) -> np.ndarray:
    return params.k * params.gamma_bar / gains.h


def _rayleigh_weight(params: FmParams, gains: GainProfile, perron: PerronPair) -> float:
    """``|w|^2`` for the symmetrized Perron vector ``w_i = mu_i sqrt(g_i / d_i)``."""
    mu = perron.vector
    return float(np.sum(mu ** 2 * gains.g / _row_scale(params, gains)))


def edge_score(edge: Edge, params: FmParams, gains: GainProfile, perron: PerronPair) -> float:
    """First-order eigenvalue increase per unit weight of adding ``edge``.

    The system matrix ``-K + D A G`` (``D = K Gamma H^-1``, ``G = diag(g)``)
    is similar to a symmetric matrix through ``diag(sqrt(d / g))``; the
    Rayleigh quotient of the symmetrized Perron vector then grows by
    ``2 g_i g_j mu_i mu_j / sum_k mu_k^2 g_k / d_k``.  With uniform gains
    this is ``(d_i g_i + d_j g_j) mu_i mu_j``.
    """
    i, j = edge
    if i == j:
        raise ValueError("self-pairs are not edges")
    mu = perron.vector
    return 2.0 * gains.g[i] * gains.g[j] * mu[i] * mu[j] / _rayleigh_weight(params, gains, perron)


def lambda_shift_lower_bound(params: FmParams, gains: GainProfile, a_q, perron_nominal: PerronPair) -> float:
    """Rayleigh lower bound on the dominant eigenvalue after adding ``a_q``.

    Evaluates the symmetrized Rayleigh quotient of the nominal Perron vector
    on the perturbed matrix, so it never exceeds the true abscissa.
    """
    Aq = np.asarray(a_q, dtype=float)
    x = perron_nominal.vector * gains.g
    shift = float(x @ Aq @ x) / _rayleigh_weight(params, gains, perron_nominal)
    return perron_nominal.value + shift


def _compromised(params: FmParams, gains: GainProfile, adjacency: np.ndarray, a_q: np.ndarray) -> np.ndarray:
    return system_matrix(params, gains, adjacency + a_q)


def _with_edge(a_q: np.ndarray, edge: Edge, w: float) -> np.ndarray:
    out = a_q.copy()
    i, j = edge
    out[i, j] = out[j, i] = w
    return out


def _final_weight(a_q: np.ndarray, edge: Edge, q1_bar: float, q2_bar: float) -> float:
    """Largest ``w <= 1`` keeping both norms within their bounds.

    Both norms are continuous and nondecreasing in ``w``; the previous state
    satisfied the bounds strictly, so each violated bound has a root in (0, 1].
    """
    w = 1.0
    for bound, which in ((q1_bar, 0), (q2_bar, 1)):
        def excess(x, bound=bound, which=which):
            return tuple(matrix_norms(_with_edge(a_q, edge, x)))[which] - bound
        if excess(w) > 0:
            w = brentq(excess, 0.0, w, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return w


def run_hwa(params: FmParams, topology: Topology, theta_star: GainProfile, q1_bar: float,
            q2_bar: float) -> AttackState:
    """Greedy attack: add the best-scoring candidate edge until a norm bound binds.

    Ties in the score go to the lexicographically smallest pair.  The last
    edge is shrunk so the binding bound holds with equality.
    """
    if q1_bar < 0 or q2_bar < 0:
        raise ValueError("norm bounds must be nonnegative")
    n = topology.n_total
    A = topology.adjacency
    pool = candidate_edges(topology)
    state = AttackState(np.zeros((n, n)), frozenset(range(n)), [])
    state.abscissa_path.append(spectral_abscissa(_compromised(params, theta_star, A, state.a_q)))
    used: set[Edge] = set()
    while True:
        nm = matrix_norms(state.a_q)
        if not (nm.one_norm < q1_bar and nm.two_norm < q2_bar):
            break
        eligible = [e for e in pool if e not in used and (e[0] in state.sources or e[1] in state.sources)]
        if not eligible:
            state.exhausted = bool(pool)
            break
        perron = perron_vector(_compromised(params, theta_star, A, state.a_q))
        scores = np.array([edge_score(e, params, theta_star, perron) for e in eligible])
        best = eligible[int(np.argmax(scores))]  # argmax returns the first maximum
        a_next = _with_edge(state.a_q, best, 1.0)
        nm = matrix_norms(a_next)
        w = 1.0
        if nm.one_norm > q1_bar or nm.two_norm > q2_bar:
            w = _final_weight(state.a_q, best, q1_bar, q2_bar)
            a_next = _with_edge(state.a_q, best, w)
        state.a_q = a_next
        state.added.append((best, w))
        state.last_edge = best
        state.sources = state.sources & frozenset(best)
        used.add(best)
        state.abscissa_path.append(spectral_abscissa(_compromised(params, theta_star, A, state.a_q)))
    return state


def attacked_abscissa(params: FmParams, topology: Topology, gains: GainProfile, a_q) -> float:
    return spectral_abscissa(_compromised(params, gains, topology.adjacency, np.asarray(a_q, dtype=float)))


def best_single_edge(params: FmParams, topology: Topology, gains: GainProfile, weight: float = 1.0):
    """Exhaustive search over candidate edges for the largest abscissa after adding one.

    Returns ``(edge, abscissa)``; ties go to the lexicographically smallest pair.
    """
    best, best_val = None, -np.inf
    n = topology.n_total
    for e in candidate_edges(topology):
        val = attacked_abscissa(params, topology, gains, _with_edge(np.zeros((n, n)), e, weight))
        if val > best_val:
            best, best_val = e, val
    return best, best_val


def random_star_attack(topology: Topology, one_norm: float, two_norm: float, rng) -> np.ndarray:
    """Random single-source attack scaled to the given norms (the tighter one binds).

    A random node sends edges of random weights to a random nonempty subset of
    its non-neighbours.
    """
    rng = np.random.default_rng(rng)
    n = topology.n_total
    A = topology.adjacency
    sources = [i for i in range(n) if np.count_nonzero(A[i]) < n - 1]
    a_q = np.zeros((n, n))
    if not sources:
        return a_q
    src = int(rng.choice(sources))
    leaves = np.array([j for j in range(n) if j != src and A[src, j] == 0])
    k = int(rng.integers(1, leaves.size + 1))
    chosen = rng.choice(leaves, size=k, replace=False)
    w = rng.random(k) + 1e-3
    a_q[src, chosen] = w
    a_q[chosen, src] = w
    nm = matrix_norms(a_q)
    return a_q * min(one_norm / nm.one_norm, two_norm / nm.two_norm)
