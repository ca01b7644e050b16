"""Dominant eigenpairs of Metzler and nonnegative matrices."""

from __future__ import annotations

import dataclasses

import numpy as np

POWER_TOL = 1e-13
POWER_CAP = 100000


@dataclasses.dataclass(frozen=True)
class PerronPair:
    value: float
    vector: np.ndarray


def _check_metzler(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    off = m - np.diag(np.diag(m))
    if np.any(off < 0):
        raise ValueError("matrix is not Metzler (negative off-diagonal entry)")


def is_irreducible(m) -> bool:
    """Strong connectivity of the off-diagonal sparsity pattern (forward and backward BFS)."""
    pattern = np.asarray(m) != 0
    np.fill_diagonal(pattern, False)
    n = pattern.shape[0]
    if n == 1:
        return True

    def reaches_all(P):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = np.array([0])
        while frontier.size:
            nb = P[frontier].any(axis=0) & ~seen
            seen |= nb
            frontier = np.flatnonzero(nb)
        return seen.all()

    return bool(reaches_all(pattern) and reaches_all(pattern.T))


def _power_iteration(m: np.ndarray):
    """Perron pair of irreducible Metzler ``m`` via power iteration on ``m + shift*I``.

    Stops once the Collatz-Wielandt bracket min/max of (Bx)_i / x_i is
    relatively tighter than ``POWER_TOL``.  Returns None when the cap is hit.
    """
    n = m.shape[0]
    shift = 1.0 + np.max(np.abs(np.diag(m)))
    B = m + shift * np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(POWER_CAP):
        y = B @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        x = y / np.linalg.norm(y)
        if hi - lo <= POWER_TOL * max(abs(hi), 1e-300):
            lam = float(x @ (B @ x)) - shift  # Rayleigh quotient of the unit vector
            lam = min(max(lam, lo - shift), hi - shift)
            return lam, x
        if not np.all(x > 0):
            return None
    return None


def _dense_abscissa(m: np.ndarray) -> float:
    ev = np.linalg.eigvals(m)
    return float(np.max(ev.real))


def spectral_abscissa(m) -> float:
    """Largest real part of the spectrum of a Metzler matrix (which is itself an eigenvalue)."""
    m = np.asarray(m, dtype=float)
    _check_metzler(m)
    if m.shape[0] == 1:
        return float(m[0, 0])
    if is_irreducible(m):
        res = _power_iteration(m)
        if res is not None:
            return res[0]
    lam = _dense_abscissa(m)
    # the dominant eigenvalue of a Metzler matrix is real; check the solve agrees
    resid = np.min(np.abs(np.linalg.eigvals(m) - lam))
    if resid > 1e-8 * (1 + np.linalg.norm(m, 1)):
        raise RuntimeError("dense eigensolve failed to resolve the dominant eigenvalue")
    return lam


def perron_vector(m) -> PerronPair:
    """Dominant eigenvalue and its positive unit eigenvector for irreducible Metzler ``m``."""
    m = np.asarray(m, dtype=float)
    _check_metzler(m)
    n = m.shape[0]
    if n == 1:
        return PerronPair(float(m[0, 0]), np.ones(1))
    if not is_irreducible(m):
        raise ValueError("matrix is reducible; the Perron vector need not be positive")
    res = _power_iteration(m)
    if res is None:
        w, V = np.linalg.eig(m)
        k = int(np.argmax(w.real))
        lam = float(w[k].real)
        x = np.abs(V[:, k].real)
        x /= np.linalg.norm(x)
    else:
        lam, x = res
    if np.min(x) < 1e-12:
        raise ValueError("Perron vector has vanishing entries; matrix is numerically reducible")
    return PerronPair(lam, x)


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a nonnegative matrix."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise ValueError("expected a nonnegative matrix")
    if m.shape[0] == 1:
        return float(m[0, 0])
    if is_irreducible(m):
        res = _power_iteration(m)
        if res is not None:
            return max(res[0], 0.0)
    return float(np.max(np.abs(np.linalg.eigvals(m))))
