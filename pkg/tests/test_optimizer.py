import math

import numpy as np
import pytest

from qfipulse import optimizer as opt
from qfipulse.bilinear import closed_total, k_numeric, max_eig
from qfipulse.engine import PhysicsParams, solve
from qfipulse.errors import InvalidInput, NoImprovement
from qfipulse.optimizer import OptConfig, gradient, optimize, seed_vectors
from qfipulse.pulses import Harmonic, PlaneWave, synthesize


def test_config_validation():
    with pytest.raises(InvalidInput):
        OptConfig(Harmonic(1.0, 2), 1.0, n_seeds=0)
    with pytest.raises(InvalidInput):
        OptConfig(Harmonic(1.0, 2), 1.0, fd_step=1e-2)
    with pytest.raises(InvalidInput):
        OptConfig(Harmonic(1.0, 2), 1.0, grad_mode="newton")
    assert OptConfig(Harmonic(1.0, 2), 1.0).dim == 2
    assert OptConfig(Harmonic(1.0, 2), 1.0, PhysicsParams(delta=0.1)).dim == 4
    assert OptConfig(PlaneWave(1.0, -1, 1), 1.0).is_complex


def test_single_mode_basis():
    cfg = OptConfig(Harmonic(5.0, 1), 0.3, n_seeds=2)
    res = optimize(cfg)
    ref = solve(synthesize(Harmonic(5.0, 1), [1.0], 0.3)).total
    assert res.best_qfi == pytest.approx(ref, rel=1e-12)
    assert res.populations == pytest.approx([1.0])


def test_seed_vectors():
    cfg = OptConfig(Harmonic(700.0, 256), 1e-2, n_seeds=3, rng_seed=4)
    s = seed_vectors(cfg)
    assert int(np.argmax(s[0])) + 1 == round(700 / (2 * math.pi))
    assert all(np.linalg.norm(v) == pytest.approx(1.0) for v in s)
    again = seed_vectors(cfg)
    assert all(np.array_equal(a, b) for a, b in zip(s, again))
    pw = OptConfig(PlaneWave(20 * math.pi, -5, 5), 1e-2, PhysicsParams(delta=0.3), n_seeds=1)
    k = int(np.argmax(seed_vectors(pw)[0]))
    assert pw.basis.frequencies()[k] == pytest.approx(0.2)


def test_radial_derivative_vanishes():
    cfg = OptConfig(Harmonic(10.0, 6), 0.5)
    u = np.random.default_rng(1).standard_normal(6)
    g = gradient(cfg, u)
    assert abs(u @ g) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(g)


@pytest.mark.parametrize("basis, params", [(Harmonic(8.0, 8), PhysicsParams()),
                                           (Harmonic(6.0, 4), PhysicsParams(delta=0.3))])
def test_adjoint_matches_finite_difference(basis, params):
    fd = OptConfig(basis, 0.5, params)
    ad = OptConfig(basis, 0.5, params, grad_mode="adjoint")
    u = np.random.default_rng(9).standard_normal(fd.dim)
    g_fd, g_ad = gradient(fd, u), gradient(ad, u)
    assert np.linalg.norm(g_fd - g_ad) <= 1e-4 * np.linalg.norm(g_ad)


def test_stationary_at_eigen_optimum():
    basis = Harmonic(20 * math.pi, 20)
    alpha_sq = 1e-6
    top = max_eig(closed_total(basis))
    cfg = OptConfig(basis, alpha_sq)
    c = math.sqrt(alpha_sq) * np.real(top.vector)
    g = gradient(cfg, c, project=False)
    tangential = g - c * (c @ g) / (c @ c)
    assert np.linalg.norm(tangential) <= 1e-3 * np.linalg.norm(g)


def test_quadratic_shortcut_matches_eigenpulse():
    basis = Harmonic(10 * math.pi, 12)
    alpha_sq = 1e-6
    top = max_eig(closed_total(basis))
    eig_qfi = solve(synthesize(basis, top.vector, alpha_sq)).total
    res = optimize(OptConfig(basis, alpha_sq, n_seeds=2))
    assert res.best_qfi == pytest.approx(eig_qfi, rel=1e-2)
    assert res.within_bound


def test_complex_plane_wave_reaches_numeric_eigenvalue():
    basis = PlaneWave(6 * math.pi, -4, 4)
    params = PhysicsParams(delta=0.3)
    lam = max_eig(k_numeric(basis, params)).lambda_max
    res = optimize(OptConfig(basis, 1e-5, params, n_seeds=2))
    assert res.per_photon == pytest.approx(lam, rel=1e-2)


def test_determinism_and_monotone_ascent():
    cfg = OptConfig(Harmonic(15.0, 6), 0.2, n_seeds=3, rng_seed=12, max_iters=30)
    a, b = optimize(cfg), optimize(cfg)
    for sa, sb in zip(a.per_seed, b.per_seed):
        assert sa.history == sb.history
        assert sa.final_qfi == sb.final_qfi
        assert all(y >= x for x, y in zip(sa.history, sa.history[1:]))
    assert a.best_qfi == max(s.final_qfi for s in a.per_seed)
    csv = a.populations_csv().splitlines()
    assert csv[0] == "n,omega_n,population" and len(csv) == 7


def test_no_improvement(monkeypatch):
    class Stalled:
        nit, success, message = 0, False, "ABNORMAL_TERMINATION_IN_LNSRCH"

        def __init__(self, x):
            self.x = x

    monkeypatch.setattr(opt, "minimize", lambda fun, x0, **kw: Stalled(x0))
    with pytest.raises(NoImprovement):
        optimize(OptConfig(Harmonic(5.0, 3), 0.1, n_seeds=2))
