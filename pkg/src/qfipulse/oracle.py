"""Finite-difference QFI from the two-sided (generalized) master equation.

mu(t) is evolved with decay rate Gamma1 acting from the left and Gamma2 from
the right. Its trace is the overlap of the two global states, so

    QFI = -4 d^2 |Tr mu| / dGamma2^2   at Gamma2 = Gamma1.

This path shares no code with the engine apart from pulse evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .engine import PhysicsParams, horizon
from .errors import InvalidInput, SolverFailure, StepTooSmall
from .pulses import PulseSpec, amplitude_function, breakpoints

RTOL = 1e-12
ATOL = 1e-20
# |I - 1| below this is indistinguishable from rounding in the d-variables
CANCELLATION_FLOOR = 100 * ATOL


@dataclass(frozen=True)
class GeneralizedState:
    """Pauli components of mu = 1/2 sum c_j sigma_j, c_j = d_j + i d_{j+4}."""

    d: tuple
    gamma1: float
    gamma2: float
    t: float
    one_minus_trace: float  # 1 - |Tr mu| without cancellation

    @property
    def c(self) -> np.ndarray:
        d = np.asarray(self.d)
        return d[:4] + 1j * d[4:]

    @property
    def mu(self) -> np.ndarray:
        c0, c1, c2, c3 = self.c
        return 0.5 * np.array([[c0 + c3, c1 - 1j * c2], [c1 + 1j * c2, c0 - c3]])

    @property
    def trace(self) -> complex:
        return complex(self.d[0], self.d[4])


@dataclass(frozen=True)
class FdEstimate:
    qfi: float  # Gamma^2 F, Richardson-extrapolated
    step: float  # h (physical rate)
    richardson_err: float
    coarse: float = math.nan  # unextrapolated value at h
    fine: float = math.nan  # unextrapolated value at h/2

    def to_dict(self) -> dict:
        return {"qfi": self.qfi, "step": self.step, "richardson_err": self.richardson_err,
                "qfi_h": self.coarse, "qfi_h_half": self.fine}


def _d_rhs(f, g1, g2, d):
    gm = math.sqrt(g1) - math.sqrt(g2)
    gp = math.sqrt(g1) + math.sqrt(g2)
    s = 0.25 * (g1 + g2)
    a = 0.25 * (g1 - g2)
    gm2, gp2 = 0.25 * gm * gm, 0.25 * gp * gp

    def rhs(t, y):
        # y holds (d0 - 1, d1, d2, d3 + 1, d4, d5, d6, d7)
        e0, d1, d2, e3, d4, d5, d6, d7 = y
        d0, d3 = e0 + 1.0, e3 - 1.0
        ft = f(t)
        fr, fi = ft.real, ft.imag
        return [
            -gm2 * (e0 + e3) + gm * d5 * fi + gm * d6 * fr,
            -s * d1 - d * d2 - a * d6 + d4 * gm * fi + d3 * gp * fr,
            d * d1 - s * d2 + a * d5 - d3 * gp * fi + d4 * gm * fr,
            -gp2 * (e0 + e3) + gp * d2 * fi - gp * d1 * fr,
            -gm2 * (d4 + d7) - gm * d1 * fi - gm * d2 * fr,
            a * d2 - s * d5 - d * d6 - gm * d0 * fi + gp * d7 * fr,
            -a * d1 + d * d5 - s * d6 - d7 * gp * fi - d0 * gm * fr,
            -gp2 * (d4 + d7) + gp * d6 * fi - gp * d5 * fr,
        ]
    return rhs


def evolve_mu(gamma1: float, gamma2: float, pulse: PulseSpec, delta: float, t_end: float,
              rtol: float = RTOL, atol: float = ATOL) -> GeneralizedState:
    """Integrate the eight real d_j equations from the ground state to t_end."""
    if not (gamma1 > 0 and gamma2 > 0):
        raise InvalidInput("rates must be positive", gamma1=gamma1, gamma2=gamma2)
    ref = gamma1
    f = amplitude_function(pulse, time_scale=1.0 / ref, amp_scale=1.0 / math.sqrt(ref))
    rhs = _d_rhs(f, 1.0, gamma2 / ref, delta / ref)
    tau_end = t_end * ref
    edges = [0.0] + sorted(p * ref for p in breakpoints(pulse) if 0 < p * ref < tau_end) + [tau_end]
    y = np.zeros(8)
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol)
        if sol.status != 0:
            raise SolverFailure(sol.message, t=float(sol.t[-1]) / ref)
        y = sol.y[:, -1]
    e0, d4 = y[0], y[4]
    d = (e0 + 1.0, y[1], y[2], y[3] - 1.0, d4, y[5], y[6], y[7])
    tr = math.hypot(1.0 + e0, d4)
    one_minus = -(2.0 * e0 + e0 * e0 + d4 * d4) / (tr + 1.0)
    return GeneralizedState(d, gamma1, gamma2, t_end, one_minus)


def fidelity_global(gamma1, gamma2, pulse, delta, t) -> float:
    """I_G = |Tr mu|."""
    return 1.0 - evolve_mu(gamma1, gamma2, pulse, delta, t).one_minus_trace


def fidelity_emitted(gamma1: float, gamma2: float, pulse: PulseSpec, delta: float, t: float) -> float:
    """I_E: sum of singular values of mu(t)."""
    st = evolve_mu(gamma1, gamma2, pulse, delta, t)
    return float(np.sum(np.linalg.svd(st.mu, compute_uv=False)))


def _second_difference(pulse, params, h, t_end):
    g = params.gamma
    up = evolve_mu(g, g + h, pulse, params.delta, t_end).one_minus_trace
    dn = evolve_mu(g, g - h, pulse, params.delta, t_end).one_minus_trace
    if min(abs(up), abs(dn)) < CANCELLATION_FLOOR:
        raise StepTooSmall("fidelity indistinguishable from 1 at this step", h=h,
                           one_minus_I=[up, dn])
    # I(+) - 2 + I(-) = -(up + dn); scaled to Gamma^2 F
    return 4.0 * (up + dn) / (h / g) ** 2


def qfi_fd_global(pulse: PulseSpec, params: PhysicsParams = PhysicsParams(),
                  h: float | None = None) -> FdEstimate:
    """Gamma^2 F from second differences at h and h/2 with one Richardson step."""
    g = params.gamma
    if h is None:
        h = 1e-3 * g
    if not (1e-6 <= h / g <= 1e-2):
        raise InvalidInput("h/Gamma must lie in [1e-6, 1e-2]", h=h)
    if pulse.alpha_sq == 0.0:
        return FdEstimate(0.0, h, 0.0, 0.0, 0.0)
    t_end = horizon(pulse, params)
    coarse = _second_difference(pulse, params, h, t_end)
    fine = _second_difference(pulse, params, h / 2, t_end)
    best = (4.0 * fine - coarse) / 3.0
    return FdEstimate(best, h, abs(best - fine), coarse, fine)
