import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fmgog.spectral import is_irreducible, perron_vector, spectral_abscissa, spectral_radius

from oracles import dense_abscissa


def random_metzler(rng, n, density=0.6):
    m = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(m, rng.uniform(-3, 0, n))
    return m


def test_abscissa_two_by_two():
    assert spectral_abscissa([[-1, 0.5], [0.5, -1]]) == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_abscissa_negative_identity(n):
    assert spectral_abscissa(-np.eye(n)) == pytest.approx(-1, abs=1e-12)


def test_abscissa_matches_dense_eigensolver():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = random_metzler(rng, 6)
        assert spectral_abscissa(m) == pytest.approx(dense_abscissa(m), abs=1e-9)


def test_rejects_non_metzler():
    with pytest.raises(ValueError):
        spectral_abscissa([[0, -1], [1, 0]])


def test_perron_swap():
    p = perron_vector([[0, 1], [1, 0]])
    assert p.value == pytest.approx(1)
    np.testing.assert_allclose(p.vector, [0.70710678, 0.70710678], atol=1e-8)


def test_perron_scaled_swap():
    p = perron_vector([[0, 2], [2, 0]])
    assert p.value == pytest.approx(2)
    np.testing.assert_allclose(p.vector, [0.70710678, 0.70710678], atol=1e-8)


def test_perron_star():
    a = np.zeros((4, 4))
    a[0, 1:] = a[1:, 0] = 1
    assert perron_vector(a).value == pytest.approx(np.sqrt(3), abs=1e-10)


def test_perron_rejects_reducible():
    with pytest.raises(ValueError):
        perron_vector(np.diag([1.0, 2.0]))
    assert not is_irreducible(np.diag([1.0, 2.0]))


def test_radius_examples():
    assert spectral_radius(np.eye(3)) == pytest.approx(1)
    assert spectral_radius([[0, 0.5], [0.5, 0]]) == pytest.approx(0.5)


def test_radius_matches_dense_eigensolver():
    rng = np.random.default_rng(1)
    for _ in range(10):
        m = rng.uniform(0, 1, (8, 8))
        ref = float(np.max(np.abs(np.linalg.eigvals(m))))
        assert spectral_radius(m) == pytest.approx(ref, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), shift=st.floats(-5, 5))
def test_shift_identity(seed, shift):
    m = random_metzler(np.random.default_rng(seed), 5)
    assert spectral_abscissa(m + shift * np.eye(5)) == pytest.approx(spectral_abscissa(m) + shift, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_perron_pair_consistency(seed):
    rng = np.random.default_rng(seed)
    m = random_metzler(rng, 6, density=1.0)
    np.fill_diagonal(m, rng.uniform(-3, 0, 6))
    p = perron_vector(m)
    assert p.value == pytest.approx(spectral_abscissa(m), abs=1e-9)
    assert np.all(p.vector > 0)
    assert np.linalg.norm(p.vector) == pytest.approx(1, abs=1e-12)
    assert np.linalg.norm(m @ p.vector - p.value * p.vector) <= 1e-9 * max(np.linalg.norm(m, 2), 1)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_abscissa_monotone_in_off_diagonal(seed):
    rng = np.random.default_rng(seed)
    m = random_metzler(rng, 5)
    i, j = rng.choice(5, 2, replace=False)
    b = m.copy()
    b[i, j] += rng.uniform(0, 1)
    assert spectral_abscissa(b) >= spectral_abscissa(m) - 1e-9
