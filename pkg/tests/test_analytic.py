import math

import numpy as np
import pytest
from scipy import special
from scipy.integrate import solve_ivp

from qfipulse import analytic as an
from qfipulse.engine import PhysicsParams, solve_real
from qfipulse.errors import UnsupportedFamily
from qfipulse.pulses import (Expansion, Harmonic, PulseSpec, Rectangular, make_family, standard_pulse,
                             amplitude_function, support)

FAMILIES = ["rectangular", "gaussian", "decreasing_exp", "rising_exp", "symmetric_exp"]


def _pq_numeric(family, T, t_eval):
    pulse = PulseSpec(make_family(family, T), 1.0)
    f = amplitude_function(pulse)

    def rhs(t, y):
        return [-0.5 * y[0] + f(t).real, -0.5 * y[1] - 0.5 * y[0]]

    sol = solve_ivp(rhs, (0, t_eval[-1]), [0.0, 0.0], t_eval=t_eval, method="DOP853", rtol=1e-11, atol=1e-14)
    return sol.y


def test_pq_rect_at_end():
    p, q = an.pq_closed("rect", 1.0, 1.0, 1.0)
    assert p == pytest.approx(2 * (1 - math.exp(-0.5)), rel=1e-12)
    assert p == pytest.approx(0.786939, abs=1e-6)


@pytest.mark.parametrize("family", ["rectangular", "decreasing_exp"])
def test_pq_zero_at_origin(family):
    assert an.pq_closed(family, 1.7, 1.0, 0.0) == (0.0, 0.0)


@pytest.mark.parametrize("family", ["rising_exp", "symmetric_exp"])
def test_pq_shifted_families_vanish_far_before_peak(family):
    # closed forms extend the envelope to -infinity; at t = 0 only the e^-15 tail remains
    p, q = an.pq_closed(family, 1.0, 1.0, 0.0)
    assert abs(p) < 1e-6 and abs(q) < 1e-6


@pytest.mark.parametrize("family, T", [("rect", 0.7), ("decexp", 1.0), ("decexp", 3.0), ("risexp", 0.5),
                                       ("symexp", 2.0), ("symexp", 0.8)])
def test_pq_closed_matches_ode(family, T):
    t_end = support(PulseSpec(make_family(family, T), 1.0))[1] + 10
    t = np.linspace(0, t_end, 40)
    p, q = an.pq_closed(family, T, 1.0, t)
    pn, qn = _pq_numeric(family, T, t)
    assert np.max(np.abs(p - pn)) < 1e-6
    assert np.max(np.abs(q - qn)) < 1e-6


def test_decexp_removable_singularity():
    t = np.linspace(0, 20, 9)
    p1, q1 = an.pq_closed("decexp", 1.0, 1.0, t)
    assert np.allclose(p1, t * np.exp(-t / 2), atol=1e-15)
    p2, q2 = an.pq_closed("decexp", 1.0 + 1e-9, 1.0, t)
    assert np.allclose(p1, p2, atol=1e-8) and np.allclose(q1, q2, atol=1e-8)


def test_gaussian_has_no_closed_pq():
    with pytest.raises(UnsupportedFamily):
        an.pq_closed("gaussian", 1.0, 1.0, 0.5)


def test_long_table_examples():
    assert an.qfi_long_table("decexp", 1.0) == pytest.approx(2.0)
    assert an.qfi_long_table("symexp", 2.0) == pytest.approx(2.0)
    ref = 2 * (math.sqrt(math.pi) * 3 * math.exp(0.25) * special.erfc(0.5) - 2)
    assert an.qfi_long_table("gaussian", 1.0) == pytest.approx(ref, rel=1e-12)
    assert an.qfi_long_table("gaussian", 1.0) == pytest.approx(2.548, abs=1e-3)


@pytest.mark.parametrize("family", FAMILIES)
def test_long_table_vanishes_at_both_ends(family):
    assert an.qfi_long_table(family, 1e-6) < 1e-4
    assert an.qfi_long_table(family, 1e7) < 1e-4


def test_gaussian_large_width_branch_is_continuous():
    below, above = an.qfi_long_table("gaussian", 35 - 1e-9), an.qfi_long_table("gaussian", 35 + 1e-9)
    assert above == pytest.approx(below, rel=1e-9)


def test_long_table_maxima():
    xs = np.linspace(0.5, 1.5, 2001)
    dec = [an.qfi_long_table("decexp", x) for x in xs]
    sym = [an.qfi_long_table("symexp", x) for x in xs]
    assert xs[int(np.argmax(dec))] == pytest.approx(1.0, abs=1e-3) and max(dec) == pytest.approx(2.0)
    assert xs[int(np.argmax(sym))] == pytest.approx(1.0, abs=1e-3) and max(sym) == pytest.approx(64 / 27)


def test_short_table_examples():
    assert an.qfi_short_table("decexp", 1.0, 1.0) == pytest.approx(2 + math.sin(2) ** 2)
    # tiny width and photon number: F -> 2 A^2 = 2 alpha^2 Gamma T
    assert an.qfi_short_table("rect", 1e-4, 1e-6) == pytest.approx(2e-4, rel=1e-3)


def test_short_general():
    assert an.qfi_short_general(PulseSpec(Rectangular(1.0), 0.0)) == 0.0
    p = PulseSpec(Rectangular(1e-2), 25.0)
    assert an.qfi_short_general(p) == pytest.approx(solve_real(p).total, rel=1e-2)
    # the same value from the table row
    assert an.qfi_short_general(p) == pytest.approx(25 * an.qfi_short_table("rect", 1e-2, 25.0), rel=1e-8)


def test_rectangle_maximizes_area_on_fixed_support():
    from qfipulse.pulses import area
    rect = abs(area(PulseSpec(Rectangular(2.0), 1.0))) ** 2
    rng = np.random.default_rng(3)
    for _ in range(5):
        other = PulseSpec(Expansion(Harmonic(2.0, 6), tuple(rng.standard_normal(6))), 1.0)
        assert abs(area(other)) ** 2 < rect


def test_perturbative_examples():
    assert an.qfi_perturbative(PulseSpec(Rectangular(1.0), 0.0)) == 0.0
    assert an.qfi_perturbative(PulseSpec(make_family("decexp", 1.0), 3.0)) == pytest.approx(6.0, rel=1e-7)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("gT", [0.1, 0.3, 1.0, 3.0, 10.0])
def test_table_consistency(family, gT):
    val = an.qfi_perturbative(PulseSpec(make_family(family, gT), 1.0))
    assert val == pytest.approx(an.qfi_long_table(family, gT), rel=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_engine_in_perturbative_regime(family):
    p = standard_pulse(family, 1.0, 1e-6)
    assert solve_real(p).total == pytest.approx(an.qfi_perturbative(p), rel=1e-3)


def test_single_photon_equals_perturbative_for_real_pulses():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = PulseSpec(Expansion(Harmonic(rng.uniform(0.5, 20), 5), tuple(rng.standard_normal(5))), 0.3)
        assert an.qfi_single_photon(p) == pytest.approx(an.qfi_perturbative(p) / 0.3, rel=1e-10)


def test_single_photon_strictly_smaller_for_chirp():
    p = PulseSpec(Rectangular(4.0), 1.0, chirp=0.3)
    first, second = an.single_photon_terms(p)
    assert second > 1e-3
    assert an.qfi_single_photon(p) < an.qfi_perturbative(p)
    assert an.qfi_single_photon(PulseSpec(Rectangular(1.0), 0.0)) == 0.0


def test_quasi_steady():
    fz, fx = an.quasi_steady_rect(1e12, 1.0)
    assert fz == pytest.approx(4.0, rel=1e-9) and fx == pytest.approx(-8.0, rel=1e-9)
    fz, _ = an.quasi_steady_rect(8.0, 1.0)
    assert fz == pytest.approx(4 * 9 / 16)
    fz, _ = an.quasi_steady_rect(5.0, 1e-12)
    assert fz / 1e-12 == pytest.approx(4 * 6 / 5, rel=1e-9)


def test_gamma_conversion():
    assert an.gamma_T_from_sigma("rect", 1 / math.sqrt(12)) == pytest.approx(1.0)
    assert PhysicsParams().gamma == 1.0
