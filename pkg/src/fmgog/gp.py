"""Posynomial algebra and a log-domain interior-point solver for geometric programs.

A GP in standard form

    minimize    f0(eta)
    subject to  fi(eta) <= 1,   hj(eta) == 1,   eta > 0

becomes convex under ``x = log(eta)``: every posynomial turns into a
log-sum-exp of affine functions and every monomial equality into an affine
equality.  The solver eliminates the equalities with a null-space basis and
runs a barrier method on the remaining inequalities.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"


class Monomial:
    """``coeff * prod_k eta_k ** exponents[k]`` with ``coeff > 0``."""

    __slots__ = ("coeff", "exponents")

    def __init__(self, coeff: float, exponents) -> None:
        coeff = float(coeff)
        if not (coeff > 0.0 and math.isfinite(coeff)):
            raise ValueError(f"monomial coefficient must be positive and finite, got {coeff}")
        self.coeff = coeff
        self.exponents = np.asarray(exponents, dtype=float).reshape(-1)

    @classmethod
    def constant(cls, value: float, n_vars: int) -> "Monomial":
        return cls(value, np.zeros(n_vars))

    @classmethod
    def variable(cls, index: int, n_vars: int, power: float = 1.0, coeff: float = 1.0) -> "Monomial":
        e = np.zeros(n_vars)
        e[index] = power
        return cls(coeff, e)

    @property
    def n_vars(self) -> int:
        return self.exponents.size

    def __mul__(self, other):
        if isinstance(other, Monomial):
            return Monomial(self.coeff * other.coeff, self.exponents + other.exponents)
        if isinstance(other, Posynomial):
            return other * self
        return Monomial(self.coeff * float(other), self.exponents)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Monomial):
            return Monomial(self.coeff / other.coeff, self.exponents - other.exponents)
        return Monomial(self.coeff / float(other), self.exponents)

    def __pow__(self, power: float) -> "Monomial":
        return Monomial(self.coeff ** power, self.exponents * power)

    def __add__(self, other) -> "Posynomial":
        return Posynomial.from_terms([self]) + other

    __radd__ = __add__

    def __call__(self, eta) -> float:
        return evaluate(self, eta)

    def __repr__(self) -> str:
        return f"Monomial({self.coeff:g}, {self.exponents.tolist()})"


class Posynomial:
    """Sum of monomials, stored as a coefficient vector and an exponent matrix."""

    __slots__ = ("coeffs", "exponents")

    def __init__(self, coeffs, exponents) -> None:
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        exponents = np.asarray(exponents, dtype=float)
        if exponents.ndim != 2 or exponents.shape[0] != coeffs.size:
            raise ValueError("exponent matrix must have one row per coefficient")
        if coeffs.size == 0:
            raise ValueError("a posynomial needs at least one term")
        if not np.all(coeffs > 0) or not np.all(np.isfinite(coeffs)):
            raise ValueError("posynomial coefficients must be positive and finite")
        self.coeffs = coeffs
        self.exponents = exponents

    @classmethod
    def from_terms(cls, terms: Sequence[Monomial]) -> "Posynomial":
        terms = list(terms)
        if not terms:
            raise ValueError("a posynomial needs at least one term")
        return cls([t.coeff for t in terms], np.vstack([t.exponents for t in terms]))

    @property
    def n_vars(self) -> int:
        return self.exponents.shape[1]

    @property
    def n_terms(self) -> int:
        return self.coeffs.size

    @property
    def terms(self) -> list[Monomial]:
        return [Monomial(c, e) for c, e in zip(self.coeffs, self.exponents)]

    def is_monomial(self) -> bool:
        return self.n_terms == 1

    def __add__(self, other) -> "Posynomial":
        if isinstance(other, Monomial):
            other = Posynomial.from_terms([other])
        elif not isinstance(other, Posynomial):
            other = Posynomial([float(other)], np.zeros((1, self.n_vars)))
        return Posynomial(np.concatenate([self.coeffs, other.coeffs]),
                          np.vstack([self.exponents, other.exponents]))

    __radd__ = __add__

    def __mul__(self, other) -> "Posynomial":
        if isinstance(other, Monomial):
            return Posynomial(self.coeffs * other.coeff, self.exponents + other.exponents)
        if isinstance(other, Posynomial):
            c = np.multiply.outer(self.coeffs, other.coeffs).reshape(-1)
            e = (self.exponents[:, None, :] + other.exponents[None, :, :]).reshape(-1, self.n_vars)
            return Posynomial(c, e)
        return Posynomial(self.coeffs * float(other), self.exponents)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Posynomial":
        if isinstance(other, Monomial):
            return Posynomial(self.coeffs / other.coeff, self.exponents - other.exponents)
        return Posynomial(self.coeffs / float(other), self.exponents)

    def __call__(self, eta) -> float:
        return evaluate(self, eta)

    def __repr__(self) -> str:
        return f"Posynomial({self.n_terms} terms, {self.n_vars} vars)"


def as_posynomial(p) -> Posynomial:
    if isinstance(p, Posynomial):
        return p
    if isinstance(p, Monomial):
        return Posynomial.from_terms([p])
    raise TypeError(f"expected Monomial or Posynomial, got {type(p).__name__}")


def posynomial_sum(terms: Sequence[Monomial | Posynomial]) -> Posynomial:
    """Concatenate monomials/posynomials into one posynomial (no term merging)."""
    parts = [as_posynomial(t) for t in terms]
    if not parts:
        raise ValueError("a posynomial needs at least one term")
    return Posynomial(np.concatenate([p.coeffs for p in parts]),
                      np.vstack([p.exponents for p in parts]))


def evaluate(p: Monomial | Posynomial, eta) -> float:
    eta = np.asarray(eta, dtype=float)
    if np.any(~(eta > 0)):
        raise ValueError("posynomials are only defined for strictly positive arguments")
    p = as_posynomial(p)
    if eta.shape[-1] != p.n_vars:
        raise ValueError(f"expected {p.n_vars} variables, got {eta.shape[-1]}")
    return float(np.sum(p.coeffs * np.exp(p.exponents @ np.log(eta))))


@dataclasses.dataclass(frozen=True)
class LogPosynomial:
    """``F(x) = log f(exp(x))``, convex in ``x``."""

    log_coeffs: np.ndarray
    exponents: np.ndarray

    def value(self, x) -> float:
        z = self.exponents @ np.asarray(x, dtype=float) + self.log_coeffs
        zmax = z.max()
        return float(zmax + np.log(np.sum(np.exp(z - zmax))))

    def _weights(self, x):
        z = self.exponents @ np.asarray(x, dtype=float) + self.log_coeffs
        w = np.exp(z - z.max())
        return w / w.sum()

    def gradient(self, x) -> np.ndarray:
        return self.exponents.T @ self._weights(x)

    def hessian(self, x) -> np.ndarray:
        w = self._weights(x)
        g = self.exponents.T @ w
        return (self.exponents.T * w) @ self.exponents - np.outer(g, g)


def log_transform(p: Monomial | Posynomial) -> LogPosynomial:
    p = as_posynomial(p)
    return LogPosynomial(np.log(p.coeffs), p.exponents.copy())


@dataclasses.dataclass
class GpProblem:
    n_vars: int
    objective: Posynomial
    ineq_constraints: list[Posynomial] = dataclasses.field(default_factory=list)
    eq_constraints: list[Monomial] = dataclasses.field(default_factory=list)
    var_names: list[str] | None = None

    def __post_init__(self) -> None:
        self.objective = as_posynomial(self.objective)
        self.ineq_constraints = [as_posynomial(f) for f in self.ineq_constraints]
        eqs = []
        for h in self.eq_constraints:
            if isinstance(h, Posynomial):
                if not h.is_monomial():
                    raise ValueError("equality constraints must be monomials")
                h = h.terms[0]
            eqs.append(h)
        self.eq_constraints = eqs
        if self.var_names is None:
            self.var_names = [f"x{k}" for k in range(self.n_vars)]
        if len(self.var_names) != self.n_vars:
            raise ValueError("var_names length does not match n_vars")
        for f in [self.objective, *self.ineq_constraints]:
            if f.n_vars != self.n_vars:
                raise ValueError(f"term exponent length {f.n_vars} != n_vars {self.n_vars}")
        for h in self.eq_constraints:
            if h.n_vars != self.n_vars:
                raise ValueError(f"term exponent length {h.n_vars} != n_vars {self.n_vars}")

    def index(self, name: str) -> int:
        return self.var_names.index(name)


@dataclasses.dataclass
class GpSolution:
    status: str
    x: np.ndarray | None
    objective_value: float
    kkt_residual: float
    iterations: int
    phase1_value: float | None = None
    relaxation: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    @property
    def log_x(self) -> np.ndarray | None:
        return None if self.x is None else np.log(self.x)


@dataclasses.dataclass(frozen=True)
class SolveOptions:
    gap_tol: float = 1e-8
    centering_tol: float = 1e-11
    barrier_factor: float = 10.0
    armijo: float = 1e-4
    shrink: float = 0.5
    max_newton: int = 2000
    max_step: float = 3.0
    max_centering: int = 80
    infeasibility_margin: float = 1e-9
    # phase-I values this close to zero cannot be resolved by the barrier and
    # are treated as a feasible set with empty numerical interior
    boundary_tol: float = 5e-8
    kkt_tol: float = 1e-7
    unbounded_radius: float = 700.0


def substitute(problem: GpProblem, fixed: Mapping[int, float]) -> GpProblem:
    """Freeze variables at positive values, absorbing them into the coefficients.

    Terms that end up with identical exponent rows are not merged; constant
    constraints (no free variable left) are kept.
    """
    fixed = {int(k): float(v) for k, v in fixed.items()}
    for k, v in fixed.items():
        if not 0 <= k < problem.n_vars:
            raise IndexError(f"variable index {k} out of range")
        if not v > 0:
            raise ValueError(f"fixed value for variable {k} must be positive")
    idx = np.array(sorted(fixed), dtype=int)
    logv = np.log(np.array([fixed[k] for k in idx]))
    keep = np.setdiff1d(np.arange(problem.n_vars), idx)

    def sub(p):
        scale = np.exp(p.exponents[:, idx] @ logv) if idx.size else 1.0
        return Posynomial(p.coeffs * scale, p.exponents[:, keep])

    eqs = [sub(as_posynomial(h)).terms[0] for h in problem.eq_constraints]
    return GpProblem(
        n_vars=keep.size,
        objective=sub(problem.objective),
        ineq_constraints=[sub(f) for f in problem.ineq_constraints],
        eq_constraints=eqs,
        var_names=[problem.var_names[k] for k in keep],
    )


def dump_problem(problem: GpProblem) -> str:
    """Structured-text dump (JSON) of a GP: one ``[coeff, *exponents]`` row per term."""

    def rows(p):
        return [[float(c), *map(float, e)] for c, e in zip(p.coeffs, p.exponents)]

    doc = {
        "n_vars": problem.n_vars,
        "var_names": list(problem.var_names),
        "objective": rows(problem.objective),
        "ineq_constraints": [rows(f) for f in problem.ineq_constraints],
        "eq_constraints": [rows(as_posynomial(h)) for h in problem.eq_constraints],
    }
    return json.dumps(doc, indent=1)


def load_problem(text: str) -> GpProblem:
    doc = json.loads(text)

    def posy(rows):
        a = np.asarray(rows, dtype=float).reshape(len(rows), -1)
        return Posynomial(a[:, 0], a[:, 1:])

    return GpProblem(
        n_vars=int(doc["n_vars"]),
        var_names=list(doc["var_names"]),
        objective=posy(doc["objective"]),
        ineq_constraints=[posy(r) for r in doc["ineq_constraints"]],
        eq_constraints=[posy(r).terms[0] for r in doc["eq_constraints"]],
    )


# --------------------------------------------------------------------------
# barrier machinery


class _LogRows:
    """A stack of log-sum-exp rows ``F_i(y) = log sum_t exp(A_t y + b_t)``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, group: np.ndarray, m: int) -> None:
        self.m = m
        self.A = np.asarray(A, dtype=float)
        self.b = b
        self.group = group
        self.starts = np.flatnonzero(np.r_[True, group[1:] != group[:-1]]) if group.size else group

    def _z(self, y):
        z = self.A @ y + self.b
        zmax = np.maximum.reduceat(z, self.starts)
        s = np.add.reduceat(np.exp(z - zmax[self.group]), self.starts)
        return z, zmax + np.log(s)

    def values(self, y: np.ndarray) -> np.ndarray:
        return self._z(y)[1]

    def derivatives(self, y: np.ndarray):
        """Values, per-term softmax weights, and row gradients (m x n)."""
        z, F = self._z(y)
        w = np.exp(z - F[self.group])
        G = np.add.reduceat(self.A * w[:, None], self.starts, axis=0)
        return F, w, G

    def curvature_rows(self, w: np.ndarray, G: np.ndarray, scale: np.ndarray) -> np.ndarray:
        """Rows ``R`` with ``R^T R = sum_i scale_i * Hess F_i``.

        Uses the covariance form ``Hess F_i = sum_t w_t (a_t - G_i)(a_t - G_i)^T``,
        which avoids the cancellation in ``A^T W A - G G^T``.
        """
        return np.sqrt(scale[self.group] * w)[:, None] * (self.A - G[self.group])


def _stack(posys: Sequence[Posynomial], Z: np.ndarray, xp: np.ndarray) -> _LogRows:
    n_red = Z.shape[1]
    if not posys:
        return _LogRows(np.zeros((0, n_red)), np.zeros(0), np.zeros(0, dtype=int), 0)
    E = np.vstack([p.exponents for p in posys])
    b = np.concatenate([np.log(p.coeffs) for p in posys]) + E @ xp
    group = np.repeat(np.arange(len(posys)), [p.n_terms for p in posys])
    return _LogRows(E @ Z, b, group, len(posys))


class _Barrier:
    """Barrier subproblem ``t*F0(y) + sum_i -log(1 - exp(F_i(y)))``."""

    def __init__(self, obj: _LogRows, cons: _LogRows, linear: np.ndarray | None = None) -> None:
        self.obj = obj
        self.cons = cons
        self.linear = linear  # optional extra linear objective term

    def objective(self, y):
        v = self.obj.values(y)[0] if self.obj.m else 0.0
        if self.linear is not None:
            v += self.linear @ y
        return v

    def feasible(self, y) -> tuple[bool, np.ndarray]:
        F = self.cons.values(y) if self.cons.m else np.zeros(0)
        return bool(np.all(F < 0) and np.all(np.isfinite(F))), F

    def psi(self, y, t):
        ok, F = self.feasible(y)
        if not ok:
            return math.inf
        return t * self.objective(y) - np.sum(np.log(-np.expm1(F)))

    def derivatives(self, y, t):
        """Gradient and a square-root factor ``C`` of the Hessian (``H = C^T C``)."""
        n = y.size
        grad = np.zeros(n)
        blocks = []
        if self.obj.m:
            F0, w0, G0 = self.obj.derivatives(y)
            grad += t * G0[0]
            blocks.append(self.obj.curvature_rows(w0, G0, np.array([t])))
        if self.linear is not None:
            grad += t * self.linear
        d1 = np.zeros(0)
        F = np.zeros(0)
        if self.cons.m:
            F, w, G = self.cons.derivatives(y)
            d1 = 1.0 / np.expm1(-F)
            grad += G.T @ d1
            blocks.append(self.cons.curvature_rows(w, G, d1))
            blocks.append(np.sqrt(d1 * (1.0 + d1))[:, None] * G)
        C = np.vstack(blocks) if blocks else np.zeros((0, n))
        return grad, C, F, d1

    def gradient_parts(self, y):
        """Objective gradient and constraint gradient matrix (unscaled)."""
        g0 = np.zeros(y.size)
        if self.obj.m:
            g0 = self.obj.derivatives(y)[2][0]
        if self.linear is not None:
            g0 = g0 + self.linear
        G = self.cons.derivatives(y)[2] if self.cons.m else np.zeros((0, y.size))
        return g0, G


def _kkt_residual(bar: _Barrier, y: np.ndarray) -> float:
    """KKT residual of ``y`` under the best nonnegative multipliers.

    Multipliers minimise ``|g0 + G^T lam|^2 + |lam * F|^2`` (stationarity plus
    complementary slackness); the barrier estimate ``d1 / t`` is only first
    order accurate in the centering error, this refit is not.
    """
    g0, G = bar.gradient_parts(y)
    if bar.cons.m == 0:
        return float(np.max(np.abs(g0))) if y.size else 0.0
    F = bar.cons.values(y)
    lhs = np.vstack([G.T, np.diag(-F)])
    rhs = np.r_[-g0, np.zeros(F.size)]
    lam, _ = scipy.optimize.nnls(lhs, rhs, maxiter=50 * F.size)
    stat = np.max(np.abs(g0 + G.T @ lam)) if y.size else 0.0
    comp = np.max(np.abs(lam * F))
    return float(max(stat, comp))


def _newton_direction(C: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Solve ``(C^T C + ridge I) dy = -grad`` through a QR factorization of ``C``."""
    n = grad.size
    if n == 0:
        return np.zeros(0)
    scale = np.sqrt(np.max(np.sum(C * C, axis=0))) if C.size else 1.0
    ridge = 1e-10 * max(scale, 1.0)
    R = scipy.linalg.qr(np.vstack([C, ridge * np.eye(n)]), mode="r", check_finite=False)[0][:n]
    z = scipy.linalg.solve_triangular(R, -grad, trans="T", check_finite=False)
    return scipy.linalg.solve_triangular(R, z, check_finite=False)


@dataclasses.dataclass
class _BarrierResult:
    y: np.ndarray
    status: str
    t: float
    gap: float
    kkt: float
    iterations: int
    centered: bool = True


def _barrier_method(bar: _Barrier, y0: np.ndarray, opts: SolveOptions, stop=None,
                    t0: float = 1.0) -> _BarrierResult:
    """Barrier path following.

    ``stop(y, gap)`` is polled after every Newton step (``gap=None``) and after
    every completed centering; ``gap`` is None unless the point is centered.
    Returning True ends the run with status "stopped".  When centering fails
    at some ``t`` (rounding error dominates the Newton decrement), the last
    centered iterate is returned since its gap is a valid bound.
    """
    y = y0.copy()
    t = t0
    iters = 0
    m = bar.cons.m
    last: _BarrierResult | None = None
    factor = opts.barrier_factor
    while True:
        # centering by damped Newton
        inner = 0
        best_dec, stall = math.inf, 0
        while True:
            grad, C, F, d1 = bar.derivatives(y, t)
            dy = _newton_direction(C, grad)
            dec2 = -grad @ dy
            centered = dec2 / 2.0 <= opts.centering_tol
            if m == 0 and centered:
                # flat objectives pass the decrement test with a sizeable gradient
                centered = float(np.max(np.abs(grad), initial=0.0)) <= 0.1 * opts.kkt_tol
            if dec2 < 0.5 * best_dec:
                best_dec, stall = dec2, 0
            elif dec2 < 0.1:
                stall += 1  # full Newton steps no longer shrink the decrement
            if centered or inner >= opts.max_centering:
                break
            if stall >= 8:
                # rounding floor reached; good enough when the decrement is small
                centered = dec2 / 2.0 <= 1e-6
                break
            if iters >= opts.max_newton:
                if last is not None:
                    return last
                return _BarrierResult(y, MAX_ITERATIONS, t, math.inf, math.inf, iters, False)
            iters += 1
            inner += 1
            psi0 = bar.psi(y, t)
            # trust cap in log space keeps near-singular Newton steps sane
            step = min(1.0, opts.max_step / max(np.max(np.abs(dy)), 1e-300))
            cand = None
            min_step = 1e-16 * step
            if step == 1.0 and dec2 < 0.1:
                # quadratic region: the predicted decrease can be below the
                # rounding error of psi, so only ask for feasibility and no
                # increase beyond that rounding error
                trial = y + dy
                psi1 = bar.psi(trial, t)
                if psi1 <= psi0 + 64 * np.finfo(float).eps * max(abs(psi0), 1.0):
                    cand = trial
            while cand is None and step > min_step:
                trial = y + step * dy
                psi1 = bar.psi(trial, t)
                if psi1 <= psi0 - opts.armijo * step * dec2:
                    cand = trial
                    break
                step *= opts.shrink
            if cand is None:
                # no descent left at this precision; accept only if the
                # decrement is already small
                centered = dec2 / 2.0 <= 1e-6
                break
            y = cand
            if np.max(np.abs(y)) > opts.unbounded_radius:
                return _BarrierResult(y, UNBOUNDED, t, math.inf, math.inf, iters, False)
            if stop is not None and stop(y, None):
                return _BarrierResult(y, "stopped", t, math.inf, math.inf, iters, False)
        if not centered:
            if last is not None:
                # rounding error beat the Newton step at this t; retry a
                # smaller increase from the last centered point
                factor = math.sqrt(factor)
                if factor < 1.2:
                    return dataclasses.replace(last, iterations=iters)
                y, t = last.y.copy(), last.t * factor
                continue
            if m == 0:
                return _BarrierResult(y, MAX_ITERATIONS, t, math.inf, math.inf, iters, False)
            t *= opts.barrier_factor
            continue
        gap = float(np.sum(d1 * -F) / t) if m else 0.0
        # only a tightly centered point gives a dual bound worth certifying with
        strict = dec2 / 2.0 <= opts.centering_tol
        if stop is not None and stop(y, gap if strict else None):
            return _BarrierResult(y, "stopped", t, gap, math.inf, iters, strict)
        g0, G = bar.gradient_parts(y)
        stationarity = float(np.max(np.abs(g0 + G.T @ (d1 / t)))) if y.size else 0.0
        kkt = max(stationarity, gap)
        last = _BarrierResult(y.copy(), OPTIMAL, t, gap, kkt, iters, strict)
        if m == 0 or gap <= opts.gap_tol:
            return last
        t *= factor


def _box_start(posys: Sequence[Posynomial], n: int) -> np.ndarray:
    """Midpoint of single-variable monomial bounds in the log domain."""
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for p in posys:
        if p.n_terms != 1:
            continue
        nz = np.flatnonzero(p.exponents[0])
        if nz.size != 1:
            continue
        k = nz[0]
        a = p.exponents[0, k]
        bound = -math.log(p.coeffs[0]) / a
        if a > 0:
            hi[k] = min(hi[k], bound)
        else:
            lo[k] = max(lo[k], bound)
    x0 = np.zeros(n)
    both = np.isfinite(lo) & np.isfinite(hi)
    x0[both] = 0.5 * (lo[both] + hi[both])
    only_lo = np.isfinite(lo) & ~np.isfinite(hi)
    x0[only_lo] = np.maximum(0.0, lo[only_lo] + 1.0)
    only_hi = ~np.isfinite(lo) & np.isfinite(hi)
    x0[only_hi] = np.minimum(0.0, hi[only_hi] - 1.0)
    return x0


def solve(problem: GpProblem, options: SolveOptions | None = None, x0=None) -> GpSolution:
    """Solve a GP; ``x0`` optionally warm-starts in the original (positive) domain."""
    opts = options or SolveOptions()
    n = problem.n_vars

    # affine equalities  a_j . x = -log d_j
    if problem.eq_constraints:
        Aeq = np.vstack([h.exponents for h in problem.eq_constraints])
        beq = -np.log([h.coeff for h in problem.eq_constraints])
        xp = np.linalg.lstsq(Aeq, beq, rcond=None)[0]
        if np.max(np.abs(Aeq @ xp - beq)) > 1e-9 * (1 + np.max(np.abs(beq))):
            return GpSolution(INFEASIBLE, None, math.nan, math.inf, 0)
        Z = scipy.linalg.null_space(Aeq)
    else:
        xp = np.zeros(n)
        Z = np.eye(n)

    # constant rows have no free direction left
    cons = []
    for f in problem.ineq_constraints:
        red = f.exponents @ Z
        if np.all(np.abs(red) < 1e-14):
            val = float(np.sum(f.coeffs * np.exp(f.exponents @ xp)))
            if val > 1.0 + opts.infeasibility_margin:
                return GpSolution(INFEASIBLE, None, math.nan, math.inf, 0, phase1_value=val)
            continue
        cons.append(f)

    # directions along which no term changes leave the whole problem
    # invariant; dropping them keeps the Newton systems nonsingular
    stacked = np.vstack([problem.objective.exponents] + [f.exponents for f in cons]) @ Z
    if stacked.size:
        _, sv, Vt = np.linalg.svd(stacked, full_matrices=False)
        keep = sv > 1e-10 * max(sv[0], 1.0) if sv.size else np.zeros(0, dtype=bool)
        Z = Z @ Vt[keep].T

    if x0 is None:
        xstart = _box_start(cons, n)
    else:
        xstart = np.log(np.asarray(x0, dtype=float))
    ystart = Z.T @ (xstart - xp)

    obj_rows = _stack([problem.objective], Z, xp)
    con_rows = _stack(cons, Z, xp)
    iterations = 0
    phase1_value = None
    relax = 0.0

    F = con_rows.values(ystart) if con_rows.m else np.zeros(0)
    if con_rows.m and not np.all(F < 0):
        # phase I: minimise s subject to F_i(y) - s <= 0, over (y, s)
        r = Z.shape[1]
        A1 = np.hstack([con_rows.A, -np.ones((con_rows.group.size, 1))])
        rows1 = _LogRows(A1, con_rows.b, con_rows.group, con_rows.m)
        empty = _LogRows(np.zeros((0, r + 1)), np.zeros(0), np.zeros(0, dtype=int), 0)
        lin = np.zeros(r + 1)
        lin[-1] = 1.0
        bar1 = _Barrier(empty, rows1, linear=lin)
        s0 = float(np.max(F)) + 1.0
        z0 = np.r_[ystart, s0]
        log_margin = math.log1p(opts.infeasibility_margin)

        def strictly_feasible(z):
            return z[-1] < 0.0 and bool(np.all(con_rows.values(z[:-1]) < 0))

        def stop(z, gap):
            # feasible point found, or the dual bound already proves s* > margin
            return strictly_feasible(z) or (gap is not None and z[-1] - gap > log_margin)

        res1 = _barrier_method(bar1, z0, dataclasses.replace(opts, gap_tol=opts.infeasibility_margin / 10),
                               stop=stop)
        iterations += res1.iterations
        s_best = float(res1.y[-1])
        if res1.status in ("stopped", UNBOUNDED) and strictly_feasible(res1.y):
            phase1_value = math.exp(s_best)
            ystart = res1.y[:-1]
        elif res1.status in (MAX_ITERATIONS, UNBOUNDED):
            return GpSolution(MAX_ITERATIONS, None, math.nan, math.inf, iterations, math.exp(s_best))
        elif s_best > opts.boundary_tol or (res1.centered and s_best - res1.gap > log_margin):
            lower = s_best - res1.gap if math.isfinite(res1.gap) else s_best
            return GpSolution(INFEASIBLE, None, math.nan, math.inf, iterations, math.exp(lower))
        else:
            # feasible set with (numerically) empty interior: open it up by a hair
            phase1_value = math.exp(s_best)
            relax = max(s_best, 0.0) + 10 * opts.infeasibility_margin
            con_rows = _LogRows(con_rows.A, con_rows.b - relax, con_rows.group, con_rows.m)
            ystart = res1.y[:-1]
            if not np.all(con_rows.values(ystart) < 0):
                return GpSolution(INFEASIBLE, None, math.nan, math.inf, iterations, phase1_value)

    bar = _Barrier(obj_rows, con_rows)
    res = _barrier_method(bar, ystart, opts)
    iterations += res.iterations
    x = np.exp(xp + Z @ res.y)
    if res.status == UNBOUNDED:
        return GpSolution(UNBOUNDED, x, 0.0, math.inf, iterations, phase1_value, relax)
    value = evaluate(problem.objective, x)
    kkt = res.kkt
    if res.status == OPTIMAL and kkt > opts.kkt_tol:
        kkt = min(kkt, _kkt_residual(bar, res.y))
    status = res.status if kkt <= opts.kkt_tol or res.status != OPTIMAL else MAX_ITERATIONS
    return GpSolution(status, x, value, kkt, iterations, phase1_value, relax)


def phase1(problem: GpProblem, options: SolveOptions | None = None, x0=None) -> tuple[bool, float]:
    """Feasibility verdict and phase-I value ``s*`` (feasible iff ``s* <= 1 + margin``)."""
    opts = options or SolveOptions()
    probe = GpProblem(problem.n_vars, Posynomial.from_terms([Monomial.constant(1.0, problem.n_vars)]),
                      problem.ineq_constraints, problem.eq_constraints, problem.var_names)
    sol = solve(probe, opts, x0=x0)
    if sol.status == INFEASIBLE:
        return False, sol.phase1_value if sol.phase1_value is not None else math.inf
    if sol.status in (OPTIMAL, UNBOUNDED):
        return True, sol.phase1_value if sol.phase1_value is not None else 0.0
    raise RuntimeError(f"phase I did not settle: {sol.status}")
