import math

import numpy as np
import pytest

from qfipulse import bilinear as bl
from qfipulse.analytic import qfi_perturbative
from qfipulse.engine import PhysicsParams
from qfipulse.errors import InvalidInput
from qfipulse.pulses import Harmonic, PlaneWave, synthesize


def _harmonic(r, n):
    return Harmonic(r * math.pi, n)


def test_k1_diagonal_formula():
    r, n = 3.0, np.arange(1, 6)
    K1 = bl.k_harmonic_closed(r, 5)[0]
    E = math.exp(-math.pi * r / 2)
    ref = 4 * r / (4 * n**2 + r**2) ** 2 * (r**3 + 4 * n**2 / math.pi * (4 - 4 * (-1.0) ** n * E + r * math.pi))
    assert np.allclose(np.diag(K1), ref, rtol=1e-14)


def test_k1_diagonal_large_r():
    r = 400.0
    n = np.array([10, 100, 200, 300])
    K1 = bl.hermitian_part(bl.k_harmonic_closed(r, 300)[0])
    assert np.allclose(np.diag(K1)[n - 1], 4 / (4 * (n / r) ** 2 + 1), rtol=1e-2)


@pytest.mark.parametrize("r", [2.0, 6.0, 20.0])
def test_parity_blocks(r):
    n = 30
    idx = np.arange(1, n + 1)
    odd_even = (idx[:, None] + idx[None, :]) % 2 == 1
    K1s = bl.hermitian_part(bl.k_harmonic_closed(r, n)[0])
    C = 1.0  # any O(1) prefactor; the symmetric part is in fact parity-exact
    assert np.max(np.abs(K1s[odd_even])) <= C * math.exp(-math.pi * r / 2) + 1e-14 * np.max(np.abs(K1s))


@pytest.mark.parametrize("r", [2.0, 10.0, 50.0])
def test_closed_harmonic_matches_numeric(r):
    basis = _harmonic(r, 40)
    Kc = bl.closed_total(basis).entries
    Kn = bl.k_numeric(basis).entries
    assert np.max(np.abs(Kc - Kn)) < 1e-6


def test_closed_plane_wave_matches_numeric():
    basis = PlaneWave(3 * math.pi, -6, 6)
    Kc = bl.closed_total(basis).entries
    Kn = bl.k_numeric(basis).entries
    assert np.max(np.abs(Kc - Kn)) < 1e-6


def test_numeric_is_hermitian_and_matches_direct_quadratic_form():
    basis = PlaneWave(8.0, -3, 3)
    params = PhysicsParams(delta=0.4)
    K = bl.k_numeric(basis, params)
    E = K.entries
    assert np.max(np.abs(E - E.conj().T)) <= 1e-10 * np.max(np.abs(E))
    rng = np.random.default_rng(2)
    for _ in range(4):
        c = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        c *= 0.1 / np.linalg.norm(c)
        direct = qfi_perturbative(synthesize(basis, c, 0.01), params)
        assert K.quadratic(c) == pytest.approx(direct, rel=1e-4)


def test_hermitian_part():
    S = np.array([[1.0, 2.0], [2.0, 5.0]])
    A = np.array([[0.0, 3.0], [-3.0, 0.0]])
    assert np.array_equal(bl.hermitian_part(S), S)
    assert np.array_equal(bl.hermitian_part(A), np.zeros((2, 2)))
    K1 = bl.k_harmonic_closed(5.0, 8)[0]
    K1h = bl.hermitian_part(K1)
    rng = np.random.default_rng(0)
    for c in rng.standard_normal((100, 8)):
        assert c @ K1 @ c == pytest.approx(c @ K1h @ c, rel=1e-12)
    with pytest.raises(InvalidInput):
        bl.hermitian_part(np.ones((2, 3)))


def test_asymptotic_lambda():
    assert bl.asymptotic_lambda(0.5) == pytest.approx(4.0)
    assert bl.asymptotic_lambda(0.25) == pytest.approx(2.56)
    assert bl.asymptotic_lambda(0.0, "periodic") == 0.0
    assert bl.asymptotic_lambda(0.25, "periodic") == pytest.approx(4.0)
    assert bl.asymptotic_lambda(-0.25, "periodic") == pytest.approx(4.0)
    assert bl.asymptotic_lambda(0.125, "periodic") == pytest.approx(2.56)
    x = np.linspace(0, 3, 3001)
    assert x[np.argmax(bl.asymptotic_lambda(x))] == pytest.approx(0.5)


def test_max_eig_identity_tie():
    res = bl.max_eig(np.eye(3))
    assert res.lambda_max == pytest.approx(1.0)
    assert np.allclose(res.vector, [1, 0, 0])


def test_max_eig_diagonal_model():
    r = 100.0
    n = np.arange(1, 151)
    K = bl.KMatrix(np.diag(bl.asymptotic_lambda(n / r)), _harmonic(r, 150))
    res = bl.max_eig(K)
    assert res.lambda_max == pytest.approx(4.0)
    assert res.top_mode == 50


@pytest.mark.parametrize("r", [10.0, 50.0])
def test_eigenvalue_range(r):
    w = bl.max_eig(bl.closed_total(_harmonic(r, 60))).eigenvalues
    assert w.min() >= -1e-8 and w.max() <= 4 + 1e-2


def test_lambda_converges_to_four():
    lams = [bl.max_eig(bl.closed_total(_harmonic(r, max(40, int(r))))).lambda_max for r in (20, 50, 100, 200)]
    assert all(b >= a for a, b in zip(lams, lams[1:]))
    for r, lam in zip((20, 50, 100, 200), lams):
        assert 4 - 4 / r <= lam <= 4


def test_top_mode_phase_is_deterministic():
    res = bl.max_eig(bl.closed_total(PlaneWave(20 * math.pi, -10, 10)))
    j = int(np.argmax(np.abs(res.vector)))
    assert np.real(res.vector[j]) > 0 and abs(np.imag(res.vector[j])) < 1e-14
