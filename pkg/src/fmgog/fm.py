"""Foschini-Miljanic power control: SINR, the compact linear update, fixed points, stability."""

from __future__ import annotations

import dataclasses

import numpy as np

from .spectral import spectral_abscissa, spectral_radius


def _vec(x, n: int | None, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        if n is None:
            raise ValueError(f"{name}: scalar needs an explicit size")
        a = np.full(n, float(a))
    if n is not None and a.shape != (n,):
        raise ValueError(f"{name}: expected shape ({n},), got {a.shape}")
    return a


@dataclasses.dataclass(frozen=True)
class FmParams:
    """Per-channel constants: step gains ``k`` in (0, 1], target SINRs, noise variances."""

    k: np.ndarray
    gamma_bar: np.ndarray
    nu: np.ndarray

    def __post_init__(self) -> None:
        k = _vec(self.k, None, "k")
        n = k.size
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "gamma_bar", _vec(self.gamma_bar, n, "gamma_bar"))
        object.__setattr__(self, "nu", _vec(self.nu, n, "nu"))
        if np.any(~((self.k > 0) & (self.k <= 1))):
            raise ValueError("every k_i must lie in (0, 1]")
        if np.any(self.gamma_bar < 0):
            raise ValueError("target SINRs must be nonnegative")
        if np.any(~(self.nu > 0)):
            raise ValueError("noise variances must be positive")

    @classmethod
    def uniform(cls, n: int, k: float = 1.0, gamma_bar: float = 1.0, nu: float = 1.0) -> "FmParams":
        return cls(np.full(n, k), np.full(n, gamma_bar), np.full(n, nu))

    @property
    def n(self) -> int:
        return self.k.size


@dataclasses.dataclass(frozen=True)
class GainBounds:
    g_lo: float
    g_hi: float
    h_lo: float
    h_hi: float

    def __post_init__(self) -> None:
        if not (0 < self.g_lo < self.g_hi and 0 < self.h_lo < self.h_hi):
            raise ValueError("gain bounds must satisfy 0 < g_lo < g_hi and 0 < h_lo < h_hi")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.g_lo, self.g_hi, self.h_lo, self.h_hi)


@dataclasses.dataclass(frozen=True)
class GainProfile:
    """Transmission gains ``h`` and per-node interference scales ``g``."""

    h: np.ndarray
    g: np.ndarray
    bounds: GainBounds | None = None

    def __post_init__(self) -> None:
        h = _vec(self.h, None, "h")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", _vec(self.g, h.size, "g"))
        if np.any(~(self.h > 0)) or np.any(~(self.g > 0)):
            raise ValueError("gains must be strictly positive")
        b = self.bounds
        if b is not None:
            tol = 1e-9
            if np.any(self.g < b.g_lo * (1 - tol)) or np.any(self.g > b.g_hi * (1 + tol)):
                raise ValueError("g outside its bounds")
            if np.any(self.h < b.h_lo * (1 - tol)) or np.any(self.h > b.h_hi * (1 + tol)):
                raise ValueError("h outside its bounds")

    @classmethod
    def midpoint(cls, n: int, bounds: GainBounds) -> "GainProfile":
        return cls(np.full(n, 0.5 * (bounds.h_lo + bounds.h_hi)),
                   np.full(n, 0.5 * (bounds.g_lo + bounds.g_hi)), bounds)

    @property
    def n(self) -> int:
        return self.h.size

    def replace(self, nodes, h=None, g=None) -> "GainProfile":
        """Copy with the given nodes' gains overwritten."""
        hh, gg = self.h.copy(), self.g.copy()
        if h is not None:
            hh[nodes] = h
        if g is not None:
            gg[nodes] = g
        return GainProfile(hh, gg, self.bounds)


def interference_matrix(gains: GainProfile, adjacency) -> np.ndarray:
    """``G_ij = a_ij * g_j``: interference at receiver i from transmitter j."""
    A = np.asarray(adjacency, dtype=float)
    return A * gains.g[None, :]


def system_matrix(params: FmParams, gains: GainProfile, adjacency) -> np.ndarray:
    """Metzler matrix ``K(-I + Gamma H^-1 A diag(g))`` of the linear FM update."""
    A = np.asarray(adjacency, dtype=float)
    n = params.n
    if A.shape != (n, n) or gains.n != n:
        raise ValueError("dimension mismatch between parameters, gains and adjacency")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency must have a zero diagonal")
    scale = params.k * params.gamma_bar / gains.h
    return scale[:, None] * A * gains.g[None, :] - np.diag(params.k)


def sinr(params: FmParams, gains: GainProfile, adjacency, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return gains.h * p / (params.nu + interference_matrix(gains, adjacency) @ p)


def fm_step(params: FmParams, gains: GainProfile, adjacency, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    M = system_matrix(params, gains, adjacency)
    return M @ p + p + params.k * params.gamma_bar * params.nu / gains.h


def fixed_point(params: FmParams, gains: GainProfile, adjacency) -> np.ndarray:
    """Power vector at which every SINR equals its target; raises if the update is unstable."""
    M = system_matrix(params, gains, adjacency)
    if spectral_abscissa(M) >= 0:
        raise ValueError("system matrix is not Hurwitz; no positive fixed point is reachable")
    n = params.n
    c = params.gamma_bar / gains.h
    lhs = np.eye(n) - c[:, None] * interference_matrix(gains, adjacency)
    return np.linalg.solve(lhs, c * params.nu)


@dataclasses.dataclass
class SimulationResult:
    powers: np.ndarray  # final power vector
    steps: int
    converged: bool
    trajectory: np.ndarray | None = None


def simulate(params: FmParams, gains: GainProfile, adjacency, p0=None, tol: float = 1e-10,
             max_steps: int = 1_000_000, record: bool = False) -> SimulationResult:
    """Iterate the FM update until successive powers differ by less than ``tol`` in max norm."""
    n = params.n
    p = np.zeros(n) if p0 is None else np.asarray(p0, dtype=float).copy()
    if np.any(p < 0):
        raise ValueError("initial powers must be nonnegative")
    T = system_matrix(params, gains, adjacency) + np.eye(n)
    b = params.k * params.gamma_bar * params.nu / gains.h
    traj = [p.copy()] if record else None
    for step in range(1, max_steps + 1):
        nxt = T @ p + b
        if record:
            traj.append(nxt.copy())
        done = np.max(np.abs(nxt - p)) < tol
        p = nxt
        if done:
            return SimulationResult(p, step, True, np.array(traj) if record else None)
    return SimulationResult(p, max_steps, False, np.array(traj) if record else None)


@dataclasses.dataclass(frozen=True)
class StabilityReport:
    stable: bool
    abscissa: float
    schur_radius: float


def is_robustly_stable(params: FmParams, gains: GainProfile, adjacency, varsigma: float) -> StabilityReport:
    """Abscissa below ``-varsigma`` and the discrete update ``M + I`` Schur stable."""
    if not 0 < varsigma < 1:
        raise ValueError("varsigma must lie in (0, 1)")
    M = system_matrix(params, gains, adjacency)
    a = spectral_abscissa(M)
    r = spectral_radius(M + np.eye(params.n))
    return StabilityReport(bool(a < -varsigma and r < 1), a, r)
