"""Round-robin robust gain allocation between two subnetwork policymakers.

Each policymaker owns the gains of its subnetwork and, in turn, solves a GP
that minimizes the shifted total cost subject to a robust-stability
certificate against every adding-edge attack ``A_q`` with
``||A_q||_1 <= q1_bar`` and ``||A_q||_2 <= q2_bar``.  The attack enters the
system matrix as ``K Gamma H^-1 A_q diag(g)``, i.e. the certificate builders
run with ``E = I`` and ``F = diag(g)``.
"""

from __future__ import annotations

import dataclasses
import math
import time
from typing import Callable

import numpy as np

from . import robust
from .cost import CostModel, alpha, beta, l0_constant, shifted_cost_posynomial, total_cost
from .fm import FmParams, GainProfile
from .gp import GpProblem, GpSolution, Monomial, Posynomial, SolveOptions, evaluate, solve, substitute
from .robust import VarLayout, _RowBuilder
from .topology import Topology

# Shifted costs are O(100); a relative gap of 1e-9 keeps absolute errors
# well below the 1e-6 monotonicity slack.
GAME_SOLVE_OPTIONS = SolveOptions(gap_tol=1e-9)
# At the exact maximal q2_bar the owner's feasible set has empty interior and
# interior-point solves lose all precision; the reported maximum keeps a
# relative margin of this size.
QMAX_BACKOFF = 1e-5


@dataclasses.dataclass(frozen=True)
class GameConfig:
    c1: int = 2
    c2: int = 3
    tol: float = 1e-4
    varsigma: float = 0.01
    q1_bar: float = 2.25
    q2_bar: float = 0.0
    max_cycles: int = 200

    def __post_init__(self) -> None:
        if self.c1 < 1 or self.c2 < 1:
            raise ValueError("update frequencies must be positive integers")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.varsigma < 1:
            raise ValueError("varsigma must lie in (0, 1)")
        if self.q1_bar < 0 or self.q2_bar < 0:
            raise ValueError("attack magnitudes must be nonnegative")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be positive")

    @property
    def max_rounds(self) -> int:
        return self.max_cycles * math.lcm(self.c1, self.c2)

    @property
    def coprime(self) -> bool:
        return math.gcd(self.c1, self.c2) == 1

    def frequency(self, owner: int) -> int:
        return self.c1 if owner == 1 else self.c2


class GameInfeasible(RuntimeError):
    """A round's GP has no feasible point."""

    def __init__(self, message: str, round_index: int | None, owner: int | None, phase1_value):
        super().__init__(message)
        self.round_index = round_index
        self.owner = owner
        self.phase1_value = phase1_value


@dataclasses.dataclass
class RoundProblem:
    """A round GP together with the bookkeeping to read the owner's gains back."""

    problem: GpProblem
    owner: int
    nodes: np.ndarray
    full_layout: VarLayout
    free_index: np.ndarray  # full-layout index of each free variable
    frozen: GainProfile
    robust_rows: int
    box_rows: int
    q2_variable: bool = False

    def theta_from(self, x: np.ndarray, bounds=None) -> GainProfile:
        """Merge the owner's solved gains into the frozen profile."""
        pos = {int(k): p for p, k in enumerate(self.free_index)}
        lay = self.full_layout
        g = np.array([x[pos[lay.g(i)]] for i in self.nodes])
        h = np.array([x[pos[lay.h(i)]] for i in self.nodes])
        if bounds is not None:
            g = np.clip(g, bounds.g_lo, bounds.g_hi)
            h = np.clip(h, bounds.h_lo, bounds.h_hi)
        return self.frozen.replace(self.nodes, h=h, g=g)

    def full_point(self, x: np.ndarray, theta: GainProfile) -> np.ndarray:
        """Full-layout vector: solved free variables plus the frozen gains."""
        lay = self.full_layout
        out = np.ones(lay.n_vars)
        out[: lay.n] = theta.g
        out[lay.n: 2 * lay.n] = theta.h
        out[self.free_index] = x
        return out

    def restrict(self, full_x: np.ndarray) -> np.ndarray:
        return np.asarray(full_x)[self.free_index]

    def q2_from(self, x: np.ndarray) -> float:
        if not self.q2_variable:
            raise ValueError("this problem has no q2 variable")
        pos = {int(k): p for p, k in enumerate(self.free_index)}
        return float(x[pos[self.full_layout.extra(0)]])


def _attack_rows(params: FmParams, adjacency, config: GameConfig, lay: VarLayout,
                 q2_variable: bool) -> list[Posynomial | None]:
    n = lay.n
    A = np.asarray(adjacency, dtype=float)
    E = robust._const_matrix(np.eye(n))
    F = robust._diag_var([lay.g(i) for i in range(n)])
    # the admissible attacks satisfy both norm bounds, so a zero bound leaves
    # only A_q = 0 and the certificate reduces to nominal stability
    no_attack = config.q1_bar == 0 or (config.q2_bar == 0 and not q2_variable)
    s1 = None if no_attack else (math.sqrt(config.q1_bar), {})
    if q2_variable:
        s2 = None if no_attack else (1.0, {lay.extra(0): 0.5})
    else:
        s2 = None if no_attack else (math.sqrt(config.q2_bar), {})
    rb = _RowBuilder(lay.n_vars)
    robust._c1_rows(rb, lay, params, A, E, F, s1, config.varsigma)
    robust._c2_rows(rb, lay, params, A, E, F, s2, config.varsigma, np.arange(n))
    return rb.posynomials()


def _round_problem(owner: int, frozen_theta: GainProfile, params: FmParams, topology: Topology,
                   config: GameConfig, cost: CostModel, q2_variable: bool) -> RoundProblem:
    if owner not in (1, 2):
        raise ValueError("owner must be 1 or 2")
    n = topology.n_total
    if frozen_theta.n != n or params.n != n:
        raise ValueError("gain profile and parameters must cover every node")
    b = cost.bounds
    GainProfile(frozen_theta.h, frozen_theta.g, b)  # bounds check
    lay = VarLayout(n, n, 1 if q2_variable else 0)
    rows = [r for r in _attack_rows(params, topology.adjacency, config, lay, q2_variable) if r is not None]
    nodes = topology.nodes_of(owner)
    boxes = robust.box_constraints(b, lay, nodes)
    if q2_variable:
        objective = Posynomial.from_terms([Monomial.variable(lay.extra(0), lay.n_vars, -1.0)])
    else:
        g_idx, h_idx = lay.gain_indices()
        objective = shifted_cost_posynomial(cost, g_idx, h_idx, lay.n_vars)
    full = GpProblem(lay.n_vars, objective, rows + boxes, [], lay.names())
    others = topology.nodes_of(3 - owner)
    fixed = {lay.g(i): frozen_theta.g[i] for i in others}
    fixed.update({lay.h(i): frozen_theta.h[i] for i in others})
    reduced = substitute(full, fixed)
    free = np.setdiff1d(np.arange(lay.n_vars), np.array(sorted(fixed), dtype=int))
    return RoundProblem(reduced, owner, nodes, lay, free, frozen_theta, len(rows), len(boxes), q2_variable)


def assemble_q(round_owner: int, frozen_theta: GainProfile, params: FmParams, topology: Topology,
               config: GameConfig, cost: CostModel) -> RoundProblem:
    """The owner's round GP with the other subnetwork's gains frozen at ``frozen_theta``."""
    return _round_problem(round_owner, frozen_theta, params, topology, config, cost, False)


def assemble_r(owner: int, initial_theta: GainProfile, params: FmParams, topology: Topology,
               config: GameConfig, cost: CostModel) -> RoundProblem:
    """Largest certifiable 2-norm attack magnitude for one policymaker acting alone."""
    return _round_problem(owner, initial_theta, params, topology, config, cost, True)


def shifted_total_cost(theta: GainProfile, cost: CostModel) -> float:
    """Total cost over all nodes plus the posynomial shift."""
    return total_cost(theta.g, theta.h, cost) + l0_constant(cost, theta.n)


def network_costs(theta: GainProfile, topology: Topology, cost: CostModel) -> tuple[float, float]:
    out = []
    for net in (1, 2):
        idx = topology.nodes_of(net)
        out.append(total_cost(theta.g[idx], theta.h[idx], cost))
    return out[0], out[1]


def investments(theta: GainProfile, cost: CostModel) -> tuple[np.ndarray, np.ndarray]:
    return np.atleast_1d(alpha(theta.g, cost)), np.atleast_1d(beta(theta.h, cost))


def is_feasible(rp: RoundProblem, x0=None) -> tuple[bool, float]:
    from .gp import phase1

    return phase1(rp.problem, GAME_SOLVE_OPTIONS, x0=x0)


@dataclasses.dataclass
class EquilibriumResult:
    theta_star: GainProfile
    cost_trajectory: list[tuple[int, float]]
    rounds_used: int
    converged: bool
    qmax: float | None = None
    certificate_x: np.ndarray | None = None  # full-layout solution of the last update
    solve_seconds: float = 0.0

    def network_costs(self, topology: Topology, cost: CostModel) -> tuple[float, float]:
        return network_costs(self.theta_star, topology, cost)


def _solve_round(rp: RoundProblem, x0_full, round_index, owner) -> GpSolution:
    x0 = None if x0_full is None else rp.restrict(x0_full)
    sol = solve(rp.problem, GAME_SOLVE_OPTIONS, x0=x0)
    if sol.status == "infeasible":
        raise GameInfeasible(f"round {round_index}: policymaker {owner}'s GP is infeasible",
                             round_index, owner, sol.phase1_value)
    if not sol.ok:
        raise RuntimeError(f"round {round_index}: policymaker {owner}'s GP ended with status {sol.status}")
    return sol


def run_hig(params: FmParams, topology: Topology, config: GameConfig, cost: CostModel,
            initial_theta: GainProfile | None = None,
            on_update: Callable[[int, int, GainProfile, float], None] | None = None,
            check_initial: bool = True) -> EquilibriumResult:
    """Round-robin best responses until both subnetworks stop moving.

    At round ``r`` policymaker 1 re-solves when ``r % c1 == 0``, then
    policymaker 2 when ``r % c2 == 0`` (seeing 1's fresh gains).  The run
    stops after round ``r > max(c1, c2)`` once both
    ``||theta_pi(r) - theta_pi(r - c_pi)|| <= tol``.
    """
    b = cost.bounds
    n = topology.n_total
    theta = initial_theta if initial_theta is not None else GainProfile.midpoint(n, b)
    if check_initial:
        for owner in (1, 2):
            ok, s = is_feasible(assemble_q(owner, theta, params, topology, config, cost))
            if not ok:
                raise GameInfeasible(f"initial profile: policymaker {owner}'s GP is infeasible",
                                     0, owner, s)
    history = [theta]  # history[r] = profile after round r
    trajectory: list[tuple[int, float]] = []
    last_full = None
    spent = 0.0
    converged = False
    r = 0
    for r in range(1, config.max_rounds + 1):
        for owner in (1, 2):
            if r % config.frequency(owner):
                continue
            rp = assemble_q(owner, theta, params, topology, config, cost)
            t0 = time.perf_counter()
            sol = _solve_round(rp, last_full, r, owner)
            spent += time.perf_counter() - t0
            x = sol.x
            if last_full is not None:
                # the previous point stays feasible; never trade it for a
                # solver answer that is worse within tolerance
                x_prev = rp.restrict(last_full)
                if evaluate(rp.problem.objective, x_prev) < sol.objective_value and all(
                        evaluate(f, x_prev) <= 1.0 for f in rp.problem.ineq_constraints):
                    x = x_prev
            theta = rp.theta_from(x, b)
            last_full = rp.full_point(x, theta)
            value = shifted_total_cost(theta, cost)
            trajectory.append((r, value))
            if on_update is not None:
                on_update(r, owner, theta, value)
        history.append(theta)
        if r > max(config.c1, config.c2):
            moves = []
            for owner in (1, 2):
                idx = topology.nodes_of(owner)
                prev = history[r - config.frequency(owner)]
                moves.append(np.linalg.norm(np.r_[theta.g[idx] - prev.g[idx], theta.h[idx] - prev.h[idx]]))
            if max(moves) <= config.tol:
                converged = True
                break
    return EquilibriumResult(theta, trajectory, r, converged, None, last_full, spent)


def unilateral_improvement(params: FmParams, topology: Topology, config: GameConfig, cost: CostModel,
                           result: EquilibriumResult, owner: int) -> float:
    """Cost decrease the owner could still obtain by re-solving against ``theta_star``."""
    rp = assemble_q(owner, result.theta_star, params, topology, config, cost)
    x0 = result.certificate_x
    sol = _solve_round(rp, x0, None, owner)
    after = shifted_total_cost(rp.theta_from(sol.x, cost.bounds), cost)
    return shifted_total_cost(result.theta_star, cost) - after


@dataclasses.dataclass
class QmaxResult:
    q2_star: float
    per_network: tuple[float, float]
    solutions: tuple[GpSolution, GpSolution]


def find_qmax(params: FmParams, topology: Topology, config: GameConfig, cost: CostModel,
              initial_theta: GainProfile | None = None) -> QmaxResult:
    """Per-network maximal certifiable ``q2_bar`` with the other side held at ``initial_theta``.

    Values are reduced by the relative ``QMAX_BACKOFF`` so that the game GPs
    at ``q2_star`` remain strictly feasible.
    """
    theta0 = initial_theta if initial_theta is not None else GainProfile.midpoint(topology.n_total, cost.bounds)
    per, sols = [], []
    for owner in (1, 2):
        rp = assemble_r(owner, theta0, params, topology, config, cost)
        sol = solve(rp.problem, GAME_SOLVE_OPTIONS)
        if sol.status == "infeasible":
            raise GameInfeasible(f"policymaker {owner} cannot certify stability even without a 2-norm attack",
                                 None, owner, sol.phase1_value)
        if sol.status == "unbounded":
            per.append(math.inf)
        elif not sol.ok:
            raise RuntimeError(f"q2 maximization for policymaker {owner} ended with status {sol.status}")
        else:
            per.append(rp.q2_from(sol.x) * (1.0 - QMAX_BACKOFF))
        sols.append(sol)
    return QmaxResult(min(per), (per[0], per[1]), (sols[0], sols[1]))


def feasibility_edge(params: FmParams, topology: Topology, config: GameConfig, cost: CostModel,
                     owner: int, theta: GainProfile, lo: float, hi: float, rel_tol: float = 1e-3) -> tuple[float, float]:
    """Bisection on raw Phase-I feasibility of the owner's round GP over ``q2_bar``.

    Requires feasibility at ``lo`` and infeasibility at ``hi``; returns the final bracket.
    """
    def feasible(q2):
        cfg = dataclasses.replace(config, q2_bar=q2)
        return is_feasible(assemble_q(owner, theta, params, topology, cfg, cost))[0]

    if not feasible(lo):
        raise ValueError("lower end of the bracket is infeasible")
    if feasible(hi):
        raise ValueError("upper end of the bracket is feasible")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi
