import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmgog.cost import CostModel, l0_constant
from fmgog.fm import FmParams, GainProfile, system_matrix
from fmgog.gp import evaluate, solve
from fmgog.robust import (
    UncertaintyStructure, VarLayout, assemble_p2, build_c1, build_c2, extract_certificate,
    sample_delta, verify_certificate,
)
from fmgog.spectral import spectral_abscissa
from fmgog.topology import matrix_norms

from robust_instances import edge_instance

COST = CostModel()


def random_point(rng, lay):
    return np.exp(rng.uniform(-1, 1, lay.n_vars))


def pieces(x, lay, unc):
    n = lay.n
    take = lambda f: x[[f(i) for i in range(n)]]
    pis = x[[lay.pi(b) for b in range(unc.n_blocks)]][unc.block_of()]
    return dict(g=take(lay.g), h=take(lay.h), rho=take(lay.rho), pi=pis, u=take(lay.u), v=take(lay.v),
                xi=take(lay.xi), zeta=take(lay.zeta))


def random_system(rng, n):
    A = np.triu(rng.uniform(0.2, 1, (n, n)) * (rng.random((n, n)) < 0.6), 1)
    A = A + A.T
    params = FmParams(rng.uniform(0.3, 1, n), rng.uniform(0.5, 1.5, n), np.ones(n))
    E = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.5) + np.diag(rng.uniform(0.2, 1, n))
    F = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.5) + np.diag(rng.uniform(0.2, 1, n))
    full = (2,) if n >= 4 else ()
    unc = UncertaintyStructure(full, n - sum(full), E, F, rng.uniform(0.1, 1), rng.uniform(0.1, 1), 0.02, 0.03)
    return params, A, unc


def test_first_family_without_interference():
    n = 4
    params = FmParams.uniform(n)
    unc = UncertaintyStructure.diagonal(n, 0.3, 0.3, sigma1=0.05)
    lay = VarLayout(n, unc.n_blocks)
    rows = build_c1(params, np.zeros((n, n)), unc, lay)
    assert len(rows) == 2 * n
    x = random_point(np.random.default_rng(0), lay)
    rho = pieces(x, lay, unc)["rho"]
    for i in range(n):
        assert evaluate(rows[i], x) == pytest.approx((0.05 * rho[i] + np.sqrt(0.3)) / rho[i], rel=1e-13)


def test_c2_row_count():
    rng = np.random.default_rng(1)
    params, A, unc = random_system(rng, 5)
    assert len(build_c2(params, A, unc)) == 4 * 5


def test_variable_count():
    unc = UncertaintyStructure((3,), 4, np.eye(7), np.eye(7), 0.5, 0.5)
    params = FmParams.uniform(7)
    prob = assemble_p2(params, COST.bounds, np.zeros((7, 7)), unc, COST)
    assert prob.n_vars == 2 * 7 + 7 + (1 + 4) + 4 * 7


def test_c1_matches_matrix_expression():
    rng = np.random.default_rng(2)
    for _ in range(5):
        n = int(rng.integers(2, 7))
        params, A, unc = random_system(rng, n)
        lay = VarLayout(n, unc.n_blocks)
        rows = build_c1(params, A, unc, lay)
        x = random_point(rng, lay)
        p = pieces(x, lay, unc)
        M = system_matrix(params, GainProfile(p["h"], p["g"]), A)
        D = params.k * params.gamma_bar / p["h"]
        se = np.sqrt(unc.eps1)
        first = 1 + (M.T @ p["rho"] + unc.sigma1 * p["rho"] + se * unc.f_matrix.sum(axis=0)) / (params.k * p["rho"])
        second = se * unc.e_matrix.T @ (D * p["rho"])
        got = np.array([evaluate(r, x) for r in rows])
        np.testing.assert_allclose(got, np.r_[first, second], rtol=1e-12)


def test_c2_matches_matrix_expression():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = int(rng.integers(2, 7))
        params, A, unc = random_system(rng, n)
        lay = VarLayout(n, unc.n_blocks)
        rows = build_c2(params, A, unc, lay)
        x = random_point(rng, lay)
        p = pieces(x, lay, unc)
        M = system_matrix(params, GainProfile(p["h"], p["g"]), A)
        D = params.k * params.gamma_bar / p["h"]
        E, F = unc.e_matrix, unc.f_matrix
        se, s = np.sqrt(unc.eps2), unc.sigma2
        sq = np.sqrt(p["pi"])
        fam1 = se * sq * (F @ p["xi"]) / p["v"]
        fam2 = 1 + (M @ p["xi"] + s * p["xi"] + se * D * (E @ (p["u"] / sq))) / (params.k * p["xi"])
        fam3 = se * (E.T @ (D * p["zeta"])) / sq / p["u"]
        fam4 = 1 + (M.T @ p["zeta"] + s * p["zeta"] + se * F.T @ (sq * p["v"])) / (params.k * p["zeta"])
        got = np.array([evaluate(r, x) for r in rows])
        np.testing.assert_allclose(got, np.r_[fam1, fam2, fam3, fam4], rtol=1e-12)


def test_c2_transpose_symmetry():
    n = 4
    params = FmParams.uniform(n)
    unc = UncertaintyStructure.diagonal(n, 0.4, 0.4)
    lay = VarLayout(n, unc.n_blocks)
    rows = build_c2(params, np.zeros((n, n)), unc, lay)
    rng = np.random.default_rng(4)
    x = random_point(rng, lay)
    x[[lay.h(i) for i in range(n)]] = 1.0
    x[[lay.pi(b) for b in range(n)]] = 1.0
    y = x.copy()
    for i in range(n):
        y[lay.u(i)], y[lay.v(i)] = x[lay.v(i)], x[lay.u(i)]
        y[lay.xi(i)], y[lay.zeta(i)] = x[lay.zeta(i)], x[lay.xi(i)]
    val = lambda k, z: evaluate(rows[k], z)
    for i in range(n):
        assert val(i, x) == pytest.approx(val(2 * n + i, y), rel=1e-13)
        assert val(n + i, x) == pytest.approx(val(3 * n + i, y), rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_rows_permute_with_the_system(seed):
    rng = np.random.default_rng(seed)
    n = 4
    A = np.triu(rng.uniform(0.2, 1, (n, n)) * (rng.random((n, n)) < 0.6), 1)
    A = A + A.T
    params = FmParams(rng.uniform(0.3, 1, n), rng.uniform(0.5, 1.5, n), np.ones(n))
    E, F = np.diag(rng.uniform(0.2, 1, n)), np.diag(rng.uniform(0.2, 1, n))
    unc = UncertaintyStructure.diagonal(n, 0.3, 0.4, e_matrix=E, f_matrix=F)
    perm = rng.permutation(n)
    pparams = FmParams(params.k[perm], params.gamma_bar[perm], params.nu[perm])
    punc = UncertaintyStructure.diagonal(n, 0.3, 0.4, e_matrix=E[np.ix_(perm, perm)], f_matrix=F[np.ix_(perm, perm)])
    lay = VarLayout(n, n)
    x = random_point(rng, lay)
    # node-indexed variable groups are permuted together
    px = x.copy()
    for start in range(0, lay.n_vars, n):
        px[start:start + n] = x[start:start + n][perm]
    orig = build_c1(params, A, unc, lay) + build_c2(params, A, unc, lay)
    new = build_c1(pparams, A[np.ix_(perm, perm)], punc, lay) + build_c2(pparams, A[np.ix_(perm, perm)], punc, lay)
    for fam in range(6):
        a = np.array([evaluate(orig[fam * n + i], x) for i in range(n)])
        b = np.array([evaluate(new[fam * n + i], px) for i in range(n)])
        np.testing.assert_allclose(b, a[perm], rtol=1e-12)


def test_coefficients_positive():
    rng = np.random.default_rng(5)
    params, A, unc = random_system(rng, 6)
    prob = assemble_p2(params, COST.bounds, A, unc, COST)
    for f in prob.ineq_constraints:
        assert np.all(f.coeffs > 0)


def test_vanishing_uncertainty_gives_cheapest_corner():
    n = 5
    rng = np.random.default_rng(6)
    A = np.triu((rng.random((n, n)) < 0.5).astype(float), 1)
    A = A + A.T
    params = FmParams.uniform(n)
    gains = GainProfile(np.full(n, 4.0), np.full(n, 0.9))
    assert spectral_abscissa(system_matrix(params, gains, A)) < -0.05
    unc = UncertaintyStructure.diagonal(n, 1e-12, 1e-12)
    sol = solve(assemble_p2(params, COST.bounds, A, unc, COST))
    assert sol.ok
    assert sol.objective_value == pytest.approx(l0_constant(COST, n), rel=1e-5)
    cert = extract_certificate(sol, unc, COST.bounds)
    np.testing.assert_allclose(cert.gains.g, 0.9, rtol=1e-4)
    np.testing.assert_allclose(cert.gains.h, 4.0, rtol=1e-4)


def test_sample_delta_diagonal_structure():
    unc = UncertaintyStructure.diagonal(5, 1.0, 1.0)
    for seed in range(50):
        D = sample_delta(unc, "one", 1.0, seed)
        assert np.count_nonzero(D - np.diag(np.diag(D))) == 0
        assert np.all((np.diag(D) >= 0) & (np.diag(D) <= 1))


@pytest.mark.parametrize("kind", ["one", "two"])
def test_sample_delta_norm_statistics(kind):
    unc = UncertaintyStructure((3,), 3, np.eye(6), np.eye(6), 1.0, 1.0)
    rng = np.random.default_rng(7)
    vals = []
    for _ in range(10_000):
        D = sample_delta(unc, kind, 0.7, rng)
        nm = matrix_norms(D)
        vals.append(nm.one_norm if kind == "one" else nm.two_norm)
        assert np.all(D >= 0)
        assert not D[:3, 3:].any() and not D[3:, :3].any()
    vals = np.array(vals)
    assert vals.max() <= 0.7 + 1e-12
    assert np.any(vals >= 0.99 * 0.7)


def test_zero_sample_gives_nominal_abscissa():
    rng = np.random.default_rng(8)
    params, A, unc = random_system(rng, 5)
    gains = GainProfile(np.full(5, 5.0), np.full(5, 0.2))
    rep = verify_certificate(params, gains, A, unc, samples=1)
    assert rep.worst_abscissa == pytest.approx(spectral_abscissa(system_matrix(params, gains, A)), abs=1e-12)


def test_certified_instance_has_no_violations():
    rng = np.random.default_rng(9)
    while True:
        params, A, unc = edge_instance(rng, COST)
        sol = solve(assemble_p2(params, COST.bounds, A, unc, COST))
        if sol.ok:
            break
    cert = extract_certificate(sol, unc, COST.bounds)
    rep = verify_certificate(params, cert.gains, A, unc, samples=1000, rng_seed=0)
    assert rep.violations == 0 and rep.margin_violations == 0


def test_uncertainty_past_feasibility_is_caught():
    rng = np.random.default_rng(10)
    trials, caught = 0, 0
    while trials < 10:
        params, A, base = edge_instance(rng, COST)
        n = base.n

        def structure(eps):
            return UncertaintyStructure((), n, base.e_matrix, base.f_matrix, eps, eps)

        eps = 0.05
        sol = solve(assemble_p2(params, COST.bounds, A, structure(eps), COST))
        if not sol.ok:
            continue
        while True:
            nxt = solve(assemble_p2(params, COST.bounds, A, structure(2 * eps), COST))
            if not nxt.ok:
                break
            eps, sol = 2 * eps, nxt
        trials += 1
        # gains certified at eps, checked against twice the first infeasible size
        cert = extract_certificate(sol, structure(eps), COST.bounds)
        rep = verify_certificate(params, cert.gains, A, structure(4 * eps), samples=1000, rng_seed=trials)
        caught += rep.margin_violations > 0
    assert caught >= 9
