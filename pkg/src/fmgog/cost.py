"""Investment cost of interference suppression and transmission gain."""

from __future__ import annotations

import dataclasses

import numpy as np

from .fm import GainBounds
from .gp import Posynomial

_BOUND_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class CostModel:
    """``alpha(g)`` penalizes small interference gains, ``beta(h)`` large transmission gains.

    Both are normalized to [0, 1] over the gain box.
    """

    p_exp: float = 0.1
    q_exp: float = 1.0
    bounds: GainBounds = GainBounds(0.1, 0.9, 4.0, 6.0)

    def __post_init__(self) -> None:
        if not (self.p_exp > 0 and self.q_exp > 0):
            raise ValueError("cost exponents must be positive")

    @property
    def g_scale(self) -> float:
        b = self.bounds
        return b.g_lo ** -self.p_exp - b.g_hi ** -self.p_exp

    @property
    def h_scale(self) -> float:
        b = self.bounds
        return b.h_hi ** self.q_exp - b.h_lo ** self.q_exp


def _check(x, lo, hi, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < lo * (1 - _BOUND_TOL)) or np.any(x > hi * (1 + _BOUND_TOL)):
        raise ValueError(f"{name} outside [{lo}, {hi}]")
    return x


def alpha(g, cost: CostModel):
    """Normalized interference-suppression cost; 1 at ``g_lo``, 0 at ``g_hi``."""
    b = cost.bounds
    g = _check(g, b.g_lo, b.g_hi, "g")
    out = (g ** -cost.p_exp - b.g_hi ** -cost.p_exp) / cost.g_scale
    return float(out) if out.ndim == 0 else out


def beta(h, cost: CostModel):
    """Normalized transmission cost; 0 at ``h_lo``, 1 at ``h_hi``."""
    b = cost.bounds
    h = _check(h, b.h_lo, b.h_hi, "h")
    out = (h ** cost.q_exp - b.h_lo ** cost.q_exp) / cost.h_scale
    return float(out) if out.ndim == 0 else out


def total_cost(g, h, cost: CostModel) -> float:
    return float(np.sum(alpha(g, cost)) + np.sum(beta(h, cost)))


def l0_constant(cost: CostModel, n: int) -> float:
    """Shift that turns the summed cost over ``n`` nodes into a posynomial."""
    b = cost.bounds
    return n * (b.g_hi ** -cost.p_exp / cost.g_scale + b.h_lo ** cost.q_exp / cost.h_scale)


def shifted_cost_posynomial(cost: CostModel, g_idx, h_idx, n_vars: int) -> Posynomial:
    """``sum_i g_i^-p / Dg + h_i^q / Dh`` over the given variable indices."""
    g_idx = np.asarray(g_idx, dtype=int)
    h_idx = np.asarray(h_idx, dtype=int)
    E = np.zeros((g_idx.size + h_idx.size, n_vars))
    E[np.arange(g_idx.size), g_idx] = -cost.p_exp
    E[g_idx.size + np.arange(h_idx.size), h_idx] = cost.q_exp
    c = np.r_[np.full(g_idx.size, 1.0 / cost.g_scale), np.full(h_idx.size, 1.0 / cost.h_scale)]
    return Posynomial(c, E)
