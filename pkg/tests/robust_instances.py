"""Random instances for the robust certificate that sit near the stability edge."""

import numpy as np

from fmgog.fm import FmParams
from fmgog.robust import UncertaintyStructure
from fmgog.spectral import spectral_radius


def edge_instance(rng, cost, n=None):
    """Instance whose cheapest gain corner is close to nominally unstable.

    The target SINR is scaled from the adjacency radius so the certificate
    has to trade cost against stability margin.  Returns ``(params, A, unc)``.
    """
    b = cost.bounds
    while True:
        n_ = n or int(rng.integers(3, 9))
        A = np.triu((rng.random((n_, n_)) < 0.5) * rng.uniform(0.3, 1, (n_, n_)), 1)
        A = A + A.T
        lam = spectral_radius(A)
        if lam > 0:
            break
    gam = rng.uniform(0.8, 1.6) * b.h_lo / (b.g_hi * lam)
    params = FmParams(rng.uniform(0.5, 1, n_), np.full(n_, gam) * rng.uniform(0.9, 1.1, n_), np.ones(n_))
    nf = int(rng.integers(0, n_ // 2 + 1))
    full = (nf,) if nf >= 2 else ()
    E = np.diag(rng.uniform(0.5, 1, n_))
    F = np.diag(rng.uniform(0.2, 1, n_))
    unc = UncertaintyStructure(full, n_ - sum(full), E, F, rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5))
    return params, A, unc
