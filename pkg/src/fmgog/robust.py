"""Robust-stability certificates for the FM update under structured nonnegative uncertainty.

The perturbed system matrix is ``M + K Gamma H^-1 E Delta F`` with ``Delta``
block diagonal and nonnegative.  Two sufficient conditions are encoded as
posynomial constraints:

* a linear copositive certificate ``rho`` for ``||Delta||_1 <= eps1``
  (``build_c1``), and
* a scaled small-gain certificate ``(Pi, u, v, xi, zeta)`` for
  ``||Delta||_2 <= eps2`` (``build_c2``).

Each condition "positive part < negative part" is divided through by the
negative part so that every row reads ``posynomial <= 1``.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Callable, Mapping, Sequence

import numpy as np

from .cost import CostModel, shifted_cost_posynomial
from .fm import FmParams, GainBounds, GainProfile, system_matrix
from .gp import GpProblem, GpSolution, Monomial, Posynomial
from .spectral import spectral_abscissa
from .topology import matrix_norms


@dataclasses.dataclass(frozen=True)
class UncertaintyStructure:
    """Block pattern and size of the admissible perturbations.

    ``full_blocks`` lists the sizes of the full blocks, which occupy the
    leading diagonal positions; ``scalar_blocks`` 1x1 blocks fill the rest.
    """

    full_blocks: tuple[int, ...]
    scalar_blocks: int
    e_matrix: np.ndarray
    f_matrix: np.ndarray
    eps1: float
    eps2: float
    sigma1: float = 0.01
    sigma2: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "full_blocks", tuple(int(b) for b in self.full_blocks))
        E = np.asarray(self.e_matrix, dtype=float)
        F = np.asarray(self.f_matrix, dtype=float)
        object.__setattr__(self, "e_matrix", E)
        object.__setattr__(self, "f_matrix", F)
        n = self.n
        if any(b < 1 for b in self.full_blocks) or self.scalar_blocks < 0:
            raise ValueError("block sizes must be positive")
        if E.shape != (n, n) or F.shape != (n, n):
            raise ValueError(f"E and F must be {n}x{n} to match the block layout")
        if np.any(E < 0) or np.any(F < 0):
            raise ValueError("E and F must be nonnegative")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("uncertainty bounds must be positive")
        for s in (self.sigma1, self.sigma2):
            if not 0 < s < 1:
                raise ValueError("stability margins must lie in (0, 1)")

    @classmethod
    def diagonal(cls, n: int, eps1: float, eps2: float, sigma1: float = 0.01, sigma2: float = 0.01,
                 e_matrix=None, f_matrix=None) -> "UncertaintyStructure":
        """All-scalar structure with identity input/output maps unless given."""
        E = np.eye(n) if e_matrix is None else e_matrix
        F = np.eye(n) if f_matrix is None else f_matrix
        return cls((), n, E, F, eps1, eps2, sigma1, sigma2)

    @property
    def n(self) -> int:
        return sum(self.full_blocks) + self.scalar_blocks

    @property
    def n_blocks(self) -> int:
        return len(self.full_blocks) + self.scalar_blocks

    def block_sizes(self) -> list[int]:
        return list(self.full_blocks) + [1] * self.scalar_blocks

    def block_of(self) -> np.ndarray:
        """Block index of every diagonal position."""
        return np.repeat(np.arange(self.n_blocks), self.block_sizes())

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for s in self.block_sizes():
            out.append(slice(start, start + s))
            start += s
        return out


# --------------------------------------------------------------------------
# variable layout and term bookkeeping


@dataclasses.dataclass(frozen=True)
class VarLayout:
    """Positions of gains and certificate variables inside one GP variable vector."""

    n: int
    n_blocks: int
    n_extra: int = 0

    @property
    def n_vars(self) -> int:
        return 7 * self.n + self.n_blocks + self.n_extra

    def g(self, i):
        return i

    def h(self, i):
        return self.n + i

    def rho(self, i):
        return 2 * self.n + i

    def pi(self, b):
        return 3 * self.n + b

    def _after_pi(self, k, i):
        return 3 * self.n + self.n_blocks + k * self.n + i

    def u(self, i):
        return self._after_pi(0, i)

    def v(self, i):
        return self._after_pi(1, i)

    def xi(self, i):
        return self._after_pi(2, i)

    def zeta(self, i):
        return self._after_pi(3, i)

    def extra(self, k):
        return 7 * self.n + self.n_blocks + k

    def names(self) -> list[str]:
        n = self.n
        out = [f"g{i + 1}" for i in range(n)] + [f"h{i + 1}" for i in range(n)]
        out += [f"rho{i + 1}" for i in range(n)] + [f"pi{b + 1}" for b in range(self.n_blocks)]
        for tag in ("u", "v", "xi", "zeta"):
            out += [f"{tag}{i + 1}" for i in range(n)]
        out += [f"extra{k + 1}" for k in range(self.n_extra)]
        return out

    def gain_indices(self, nodes=None) -> tuple[np.ndarray, np.ndarray]:
        nodes = np.arange(self.n) if nodes is None else np.asarray(nodes, dtype=int)
        return nodes.copy(), self.n + nodes


# A symbolic monomial: coefficient plus {variable index: power}.
Term = tuple[float, dict]


def _mul(*terms: Term) -> Term:
    c = 1.0
    powers: dict = {}
    for tc, tp in terms:
        c *= tc
        for k, v in tp.items():
            powers[k] = powers.get(k, 0.0) + v
    return c, powers


class _RowBuilder:
    def __init__(self, n_vars: int) -> None:
        self.n_vars = n_vars
        self.rows: list[list[Term]] = []

    def add(self, terms: list[Term]) -> None:
        self.rows.append([t for t in terms if t[0] > 0])

    def posynomials(self) -> list[Posynomial | None]:
        out = []
        for terms in self.rows:
            if not terms:
                out.append(None)
                continue
            E = np.zeros((len(terms), self.n_vars))
            for r, (_, powers) in enumerate(terms):
                for k, v in powers.items():
                    E[r, k] += v
            out.append(Posynomial([t[0] for t in terms], E))
        return out


def _const_matrix(m) -> dict:
    m = np.asarray(m, dtype=float)
    return {(int(i), int(j)): (float(m[i, j]), {}) for i, j in zip(*np.nonzero(m))}


def _diag_var(indices) -> dict:
    return {(i, i): (1.0, {int(k): 1.0}) for i, k in enumerate(indices)}


def _c1_rows(rb: _RowBuilder, lay: VarLayout, params: FmParams, A: np.ndarray,
             E: dict, F: dict, sqrt_eps: Term | None, margin: float) -> None:
    n = lay.n
    k, gam = params.k, params.gamma_bar
    F_colsum: dict = {}
    for (i, j), t in F.items():
        F_colsum.setdefault(j, []).append(t)
    E_by_col: dict = {}
    for (i, j), t in E.items():
        E_by_col.setdefault(j, []).append((i, t))
    for i in range(n):
        inv = (1.0 / k[i], {lay.rho(i): -1.0})
        terms = []
        for j in np.flatnonzero(A[:, i]):
            terms.append(_mul(inv, (k[j] * gam[j] * A[j, i], {lay.g(i): 1.0, lay.h(j): -1.0, lay.rho(j): 1.0})))
        terms.append((margin / k[i], {}))
        if sqrt_eps is not None:
            for t in F_colsum.get(i, []):
                terms.append(_mul(inv, sqrt_eps, t))
        rb.add(terms)
    for i in range(n):
        terms = []
        if sqrt_eps is not None:
            for j, t in E_by_col.get(i, []):
                terms.append(_mul(sqrt_eps, t, (gam[j] * k[j], {lay.h(j): -1.0, lay.rho(j): 1.0})))
        rb.add(terms)


def _c2_rows(rb: _RowBuilder, lay: VarLayout, params: FmParams, A: np.ndarray,
             E: dict, F: dict, sqrt_eps: Term | None, margin: float, block_of: np.ndarray) -> None:
    n = lay.n
    k, gam = params.k, params.gamma_bar

    def pi_pow(i, p):
        return (1.0, {lay.pi(int(block_of[i])): p})

    rows_of: dict = {}
    cols_of: dict = {}
    for name, mat in (("E", E), ("F", F)):
        for (i, j), t in mat.items():
            rows_of.setdefault((name, i), []).append((j, t))
            cols_of.setdefault((name, j), []).append((i, t))

    # sqrt(eps) Pi^1/2 F xi < v
    for i in range(n):
        terms = []
        if sqrt_eps is not None:
            for j, t in rows_of.get(("F", i), []):
                terms.append(_mul(sqrt_eps, pi_pow(i, 0.5), t, (1.0, {lay.xi(j): 1.0, lay.v(i): -1.0})))
        rb.add(terms)
    # (M + margin) xi + sqrt(eps) K Gamma H^-1 E Pi^-1/2 u < 0
    for i in range(n):
        inv = (1.0 / k[i], {lay.xi(i): -1.0})
        terms = [(margin / k[i], {})]
        for j in np.flatnonzero(A[i]):
            terms.append((gam[i] * A[i, j], {lay.g(j): 1.0, lay.h(i): -1.0, lay.xi(j): 1.0, lay.xi(i): -1.0}))
        if sqrt_eps is not None:
            for j, t in rows_of.get(("E", i), []):
                terms.append(_mul(inv, sqrt_eps, (k[i] * gam[i], {lay.h(i): -1.0}), t, pi_pow(j, -0.5),
                                  (1.0, {lay.u(j): 1.0})))
        rb.add(terms)
    # sqrt(eps) Pi^-1/2 E^T H^-1 Gamma K zeta < u
    for i in range(n):
        terms = []
        if sqrt_eps is not None:
            for j, t in cols_of.get(("E", i), []):
                terms.append(_mul(sqrt_eps, pi_pow(i, -0.5), t,
                                  (gam[j] * k[j], {lay.h(j): -1.0, lay.zeta(j): 1.0, lay.u(i): -1.0})))
        rb.add(terms)
    # (M^T + margin) zeta + sqrt(eps) F^T Pi^1/2 v < 0
    for i in range(n):
        inv = (1.0 / k[i], {lay.zeta(i): -1.0})
        terms = [(margin / k[i], {})]
        for j in np.flatnonzero(A[:, i]):
            terms.append(_mul(inv, (k[j] * gam[j] * A[j, i], {lay.g(i): 1.0, lay.h(j): -1.0, lay.zeta(j): 1.0})))
        if sqrt_eps is not None:
            for j, t in cols_of.get(("F", i), []):
                terms.append(_mul(inv, sqrt_eps, t, pi_pow(j, 0.5), (1.0, {lay.v(j): 1.0})))
        rb.add(terms)


def _sqrt_term(eps: float) -> Term | None:
    return (float(np.sqrt(eps)), {}) if eps > 0 else None


def _check_system(params: FmParams, adjacency, n: int) -> np.ndarray:
    A = np.asarray(adjacency, dtype=float)
    if A.shape != (n, n) or params.n != n:
        raise ValueError("system data dimensions disagree with the uncertainty structure")
    if np.any(A < 0) or np.any(np.diag(A) != 0):
        raise ValueError("adjacency must be nonnegative with zero diagonal")
    return A


def build_c1(params: FmParams, adjacency, unc: UncertaintyStructure,
             layout: VarLayout | None = None) -> list[Posynomial | None]:
    """2N rows of the 1-norm certificate over the (g, h, rho) variables.

    Row order: the N "stability with margin" rows, then the N input-gain rows.
    A row can be ``None`` when it has no terms (e.g. a zero column of E),
    meaning the constraint is vacuous.
    """
    A = _check_system(params, adjacency, unc.n)
    lay = layout or VarLayout(unc.n, unc.n_blocks)
    rb = _RowBuilder(lay.n_vars)
    _c1_rows(rb, lay, params, A, _const_matrix(unc.e_matrix), _const_matrix(unc.f_matrix),
             _sqrt_term(unc.eps1), unc.sigma1)
    return rb.posynomials()


def build_c2(params: FmParams, adjacency, unc: UncertaintyStructure,
             layout: VarLayout | None = None) -> list[Posynomial | None]:
    """4N rows of the scaled small-gain certificate over (g, h, Pi, u, v, xi, zeta)."""
    A = _check_system(params, adjacency, unc.n)
    lay = layout or VarLayout(unc.n, unc.n_blocks)
    rb = _RowBuilder(lay.n_vars)
    _c2_rows(rb, lay, params, A, _const_matrix(unc.e_matrix), _const_matrix(unc.f_matrix),
             _sqrt_term(unc.eps2), unc.sigma2, unc.block_of())
    return rb.posynomials()


def box_constraints(bounds: GainBounds, layout: VarLayout, nodes=None) -> list[Posynomial]:
    """``g/g_hi <= 1, g_lo/g <= 1, h/h_hi <= 1, h_lo/h <= 1`` for each listed node."""
    nodes = range(layout.n) if nodes is None else nodes
    out = []
    nv = layout.n_vars
    for i in nodes:
        out.append(Monomial.variable(layout.g(i), nv, 1.0, 1.0 / bounds.g_hi))
        out.append(Monomial.variable(layout.g(i), nv, -1.0, bounds.g_lo))
        out.append(Monomial.variable(layout.h(i), nv, 1.0, 1.0 / bounds.h_hi))
        out.append(Monomial.variable(layout.h(i), nv, -1.0, bounds.h_lo))
    return [Posynomial.from_terms([m]) for m in out]


def assemble_p2(params: FmParams, bounds: GainBounds, adjacency, unc: UncertaintyStructure,
                cost: CostModel, extra_constraints: Sequence[Posynomial] = ()) -> GpProblem:
    """Cheapest gains certified robustly stable against both uncertainty classes.

    ``extra_constraints`` are posynomials over the 2N gain variables ``(g, h)``.
    """
    n = unc.n
    lay = VarLayout(n, unc.n_blocks)
    rows = [r for r in build_c1(params, adjacency, unc, lay) + build_c2(params, adjacency, unc, lay)
            if r is not None]
    rows += box_constraints(bounds, lay)
    for f in extra_constraints:
        if f.n_vars != 2 * n:
            raise ValueError("extra constraints must be posynomials over the 2N gain variables")
        E = np.zeros((f.n_terms, lay.n_vars))
        E[:, : 2 * n] = f.exponents
        rows.append(Posynomial(f.coeffs, E))
    g_idx, h_idx = lay.gain_indices()
    objective = shifted_cost_posynomial(cost, g_idx, h_idx, lay.n_vars)
    return GpProblem(lay.n_vars, objective, rows, [], lay.names())


# --------------------------------------------------------------------------
# certificates and sampling checks


@dataclasses.dataclass(frozen=True)
class Certificate:
    gains: GainProfile
    rho: np.ndarray
    pi_scaling: np.ndarray  # diagonal of Pi, one entry per node
    u: np.ndarray
    v: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray


def extract_certificate(solution: GpSolution, unc: UncertaintyStructure,
                        bounds: GainBounds | None = None) -> Certificate:
    if solution.x is None:
        raise ValueError(f"no solution point (status {solution.status})")
    lay = VarLayout(unc.n, unc.n_blocks)
    x = solution.x
    n = unc.n
    sl = lambda f: x[[f(i) for i in range(n)]]
    gains = GainProfile(sl(lay.h), sl(lay.g), None)
    if bounds is not None:
        # clip solver round-off back into the box
        gains = GainProfile(np.clip(gains.h, bounds.h_lo, bounds.h_hi),
                            np.clip(gains.g, bounds.g_lo, bounds.g_hi), bounds)
    pis = x[[lay.pi(b) for b in range(unc.n_blocks)]]
    return Certificate(gains, sl(lay.rho), pis[unc.block_of()], sl(lay.u), sl(lay.v), sl(lay.xi), sl(lay.zeta))


def perturbed_matrix(params: FmParams, gains: GainProfile, adjacency, e_matrix, delta, f_matrix) -> np.ndarray:
    """``M + K Gamma H^-1 E Delta F``."""
    M = system_matrix(params, gains, adjacency)
    scale = params.k * params.gamma_bar / gains.h
    return M + scale[:, None] * (np.asarray(e_matrix) @ np.asarray(delta) @ np.asarray(f_matrix))


def _random_direction(unc: UncertaintyStructure, rng: np.random.Generator) -> np.ndarray:
    n = unc.n
    D = np.zeros((n, n))
    for b, sl in enumerate(unc.block_slices()):
        size = sl.stop - sl.start
        block = rng.exponential(size=(size, size))
        if size > 1:
            # vary sparsity so that low-rank and concentrated directions appear
            block *= rng.random((size, size)) < rng.uniform(0.1, 1.0)
        D[sl, sl] = block
    if not D.any():
        D[np.diag_indices(n)] = rng.exponential(size=n)
    return D


def _norm(D: np.ndarray, kind: str) -> float:
    nm = matrix_norms(D)
    return nm.one_norm if kind == "one" else nm.two_norm


def sample_delta(unc: UncertaintyStructure, norm_kind: str, bound: float, rng_seed) -> np.ndarray:
    """Random structured nonnegative perturbation with ``norm <= bound``.

    The direction is random; the radius is ``bound`` times a uniform draw.
    ``rng_seed`` is an int seed or a ``numpy.random.Generator``.
    """
    if norm_kind not in ("one", "two"):
        raise ValueError("norm_kind must be 'one' or 'two'")
    if not bound > 0:
        raise ValueError("bound must be positive")
    rng = np.random.default_rng(rng_seed)
    D = _random_direction(unc, rng)
    return D * (bound * rng.random() / _norm(D, norm_kind))


def _fit_both(D: np.ndarray, eps1: float, eps2: float) -> np.ndarray:
    nm = matrix_norms(D)
    if nm.one_norm == 0:
        return D
    return D * min(eps1 / nm.one_norm, eps2 / nm.two_norm)


def structured_vertices(unc: UncertaintyStructure) -> list[np.ndarray]:
    """Concentrated extreme directions: all-ones pattern and one row-concentrated pattern per row."""
    n = unc.n
    out = []
    full = np.zeros((n, n))
    for sl in unc.block_slices():
        full[sl, sl] = 1.0
    out.append(full)
    for r in range(n):
        D = np.zeros((n, n))
        for sl in unc.block_slices():
            if sl.start <= r < sl.stop:
                D[r, sl] = 1.0
        out.append(D)
    return out


@dataclasses.dataclass
class VerificationReport:
    seed: int | None
    samples: int
    worst_abscissa: float
    violations: int  # perturbed abscissa >= 0
    margin_violations: int  # perturbed abscissa > -margin + tol

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))


def verify_certificate(params: FmParams, gains: GainProfile, adjacency, unc: UncertaintyStructure,
                       samples: int = 1000, rng_seed: int | None = 0,
                       sampler: Callable[[np.random.Generator], np.ndarray] | None = None,
                       margin_tol: float = 1e-6) -> VerificationReport:
    """Spectral abscissa of sampled admissible perturbations.

    Every sample is scaled to satisfy both norm bounds.  The batch always
    contains Delta = 0 and the structured vertices at full scale; the rest are
    random directions at a uniformly drawn fraction of the admissible radius
    (half of them at full radius).  ``sampler`` overrides the random part.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(rng_seed)
    A = np.asarray(adjacency, dtype=float)
    E, F = unc.e_matrix, unc.f_matrix
    margin = min(unc.sigma1, unc.sigma2)
    batch = [np.zeros((unc.n, unc.n))]
    batch += [_fit_both(V, unc.eps1, unc.eps2) for V in structured_vertices(unc)]
    batch = batch[:samples]
    k = len(batch)
    while k < samples:
        if sampler is not None:
            D = np.asarray(sampler(rng), dtype=float)
        else:
            D = _fit_both(_random_direction(unc, rng), unc.eps1, unc.eps2)
            if k % 2:
                D = D * rng.random()
        batch.append(D)
        k += 1
    worst = -np.inf
    violations = 0
    margin_violations = 0
    for D in batch:
        a = spectral_abscissa(perturbed_matrix(params, gains, A, E, D, F))
        worst = max(worst, a)
        violations += a >= 0
        margin_violations += a > -margin + margin_tol
    return VerificationReport(rng_seed if isinstance(rng_seed, int) else None, samples, float(worst),
                              int(violations), int(margin_violations))
