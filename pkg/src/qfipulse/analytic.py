"""Closed-form and perturbative reference values.

Unless stated otherwise, inputs and outputs use Gamma = 1 units: widths are
Gamma*T, times are Gamma*t and QFI values are Gamma^2 F.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.integrate import solve_ivp

from .engine import PhysicsParams, horizon
from .errors import InvalidInput, QuadratureNotConverged, SolverFailure, UnsupportedFamily
from .pulses import (RISING_T0, SIGMA_OVER_T, SYMMETRIC_T0, PulseSpec, amplitude_function,
                     area, breakpoints, canonical_family, support)

def gamma_T_from_sigma(family: str, gamma_T_sigma: float) -> float:
    return gamma_T_sigma / SIGMA_OVER_T[canonical_family(family)]


# ---------------------------------------------------------------- helpers

def _h2(y):
    """(e^y - 1 - y) / y^2, accurate near y = 0."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, 1.0, y)
    direct = (np.expm1(ys) - ys) / (ys * ys)
    series = 0.5 + y / 6.0 + y * y / 24.0 + y**3 / 120.0 + y**4 / 720.0
    return np.where(small, series, direct)


def _exp_exprel(t, y, rate):
    """e^{-rate t} * (e^y - 1)/y without overflow."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, 1.0, y)
    big = (np.exp(y - rate * t) - np.exp(-rate * t)) / ys
    return np.where(small, np.exp(-rate * t) * special.exprel(y), big)


def _exp_h2(t, y, rate):
    """e^{-rate t} * t^2 * h2(y) without overflow when y is large and positive."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, 1.0, y)
    # e^{-rate t}(e^y - 1 - y) with e^{y - rate t} formed directly
    big = np.exp(y - rate * t) - np.exp(-rate * t) * (1.0 + y)
    big = t * t * big / (ys * ys)
    return np.where(small, np.exp(-rate * t) * t * t * _h2(y), big)


# ---------------------------------------------------------------- p and q

def pq_closed(family: str, gamma_T: float, alpha: float, t, t0: float | None = None):
    """Closed-form p(t) and q(t) of the linear response kernels.

    p = int e^{-(t-s)/2} f(s) ds and q' = -q/2 - p/2 (Gamma = 1). Shifted
    families use the same t0 convention as :mod:`qfipulse.pulses`; their
    closed forms assume the envelope extends to -infinity; the truncated
    pulse differs by its tail at t = 0 (amplitude ratio e^-15 by default).
    """
    fam = canonical_family(family)
    T = float(gamma_T)
    if T <= 0:
        raise InvalidInput("gamma_T must be positive", gamma_T=gamma_T)
    t = np.asarray(t, dtype=float)
    a = float(alpha)
    sT = math.sqrt(T)
    ex = np.exp(-0.5 * np.maximum(t, 0.0))

    if fam == "rectangular":
        tc = np.minimum(t, T)
        p_in = 2 * a / sT * (-np.expm1(-0.5 * tc))
        q_in = a / sT * (2 * np.exp(-0.5 * tc) + tc * np.exp(-0.5 * tc) - 2)
        p_out = 2 * a * np.expm1(0.5 * T) / sT * ex
        q_out = a / sT * ex * (t + 2 + np.exp(0.5 * T) * (T - t - 2))
        p = np.where(t <= T, p_in, p_out)
        q = np.where(t <= T, q_in, q_out)
    elif fam == "decreasing_exp":
        tp = np.maximum(t, 0.0)
        y = tp * (T - 1.0) / (2.0 * T)
        p = a * tp / sT * _exp_exprel(tp, y, 0.5)
        q = -a / (2.0 * sT) * _exp_h2(tp, y, 0.5)
    elif fam == "rising_exp":
        s = t - (RISING_T0 * T if t0 is None else t0)
        sp = np.maximum(s, 0.0)
        pre = 2 * a * sT / (1.0 + T)
        neg = np.exp(0.5 * np.minimum(s, 0.0) / T)
        p = np.where(s <= 0, pre * neg, pre * np.exp(-0.5 * sp))
        q = np.where(s <= 0, -2 * a * T**1.5 / (1.0 + T) ** 2 * neg,
                     -a * sT / (1.0 + T) ** 2 * (sp + T * sp + 2 * T) * np.exp(-0.5 * sp))
    elif fam == "symmetric_exp":
        s = t - (SYMMETRIC_T0 * T if t0 is None else t0)
        sp = np.maximum(s, 0.0)
        neg = np.exp(np.minimum(s, 0.0) / T)
        es = np.exp(-0.5 * sp)
        y = sp * (T - 2.0) / (2.0 * T)
        # pole at Gamma*T = 2 removed analytically
        p_pos = 2 * a * sT * (es / (T + 2.0) + sp * _exp_exprel(sp, y, 0.5) / (2.0 * T))
        q_pos = (-2 * a * T**1.5 / (T + 2.0) ** 2 - a * sT * sp / (T + 2.0)) * es \
            - a / (2.0 * sT) * _exp_h2(sp, y, 0.5)
        p = np.where(s <= 0, 2 * a * sT / (T + 2.0) * neg, p_pos)
        q = np.where(s <= 0, -2 * a * T**1.5 / (T + 2.0) ** 2 * neg, q_pos)
    else:
        raise UnsupportedFamily(f"no closed-form p, q for {fam}", family=fam)
    if np.ndim(p) == 0:
        return float(p), float(q)
    return p, q


# ---------------------------------------------------------------- tables

def _gaussian_long(x: float) -> float:
    if x > 35.0:
        # large-x expansion; the direct form cancels to ~8/x^4 relative
        v = 1.0 / (x * x)
        return v * (32 + v * (-384 + v * (5760 + v * (-107520 + v * (2419200 - 63866880 * v)))))
    return 2 * x * (math.sqrt(math.pi) * (x * x + 2) * special.erfcx(0.5 * x) - 2 * x)


def qfi_long_table(family: str, gamma_T: float) -> float:
    """Gamma^2 F_long / alpha^2 for a standard family of width Gamma*T."""
    fam = canonical_family(family)
    x = float(gamma_T)
    if x <= 0:
        raise InvalidInput("gamma_T must be positive", gamma_T=gamma_T)
    if fam == "rectangular":
        return 8.0 / x * (-2.0 * math.expm1(-0.5 * x) - x * math.exp(-0.5 * x))
    if fam == "gaussian":
        return _gaussian_long(x)
    if fam in ("decreasing_exp", "rising_exp"):
        return 8.0 * x / (1.0 + x) ** 2
    if fam == "symmetric_exp":
        return 64.0 * x / (2.0 + x) ** 3
    raise UnsupportedFamily(f"no table entry for {fam}", family=fam)


def qfi_short_table(family: str, gamma_T: float, alpha_sq: float) -> float:
    """Gamma^2 F_short / alpha^2 (sin^2 arguments in Gamma = 1 units)."""
    fam = canonical_family(family)
    x = float(gamma_T)
    if x <= 0 or alpha_sq <= 0:
        raise InvalidInput("gamma_T and alpha_sq must be positive")
    a = math.sqrt(alpha_sq)
    if fam == "rectangular":
        base = 4.0 * (1.0 + 2.0 / x * math.expm1(-0.5 * x))
        ang = a * math.sqrt(x)
    elif fam == "gaussian":
        base = 2.0 * math.sqrt(math.pi) * x * special.erfcx(0.5 * x)
        ang = math.pi**0.25 * a * math.sqrt(2.0 * x)
    elif fam in ("decreasing_exp", "rising_exp"):
        base = 4.0 * x / (x + 1.0)
        ang = 2.0 * a * math.sqrt(x)
    elif fam == "symmetric_exp":
        base = 4.0 * x * (x + 4.0) / (x + 2.0) ** 2
        ang = 2.0 * a * math.sqrt(x)
    else:
        raise UnsupportedFamily(f"no table entry for {fam}", family=fam)
    return base + math.sin(ang) ** 2 / alpha_sq


def quasi_steady_rect(T_sigma: float, alpha_sq: float) -> tuple[float, float]:
    """Quasi-steady-state (F_z, F_x) for a long rectangle, literal Gamma = 1 form."""
    Ts = float(T_sigma)
    fz = 4 * alpha_sq * (Ts + 1) / (Ts + 8 * alpha_sq)
    fx = -8 * alpha_sq * (Ts + 2 * math.expm1(-Ts / 2)) / (Ts + 8 * alpha_sq)
    return fz, fx


# ---------------------------------------------------------------- general pulses

def qfi_short_general(pulse: PulseSpec, gamma: float = 1.0) -> float:
    """Gamma^2 [F_p(T) + sin^2(A)] with F_p by double quadrature over the pulse."""
    if not pulse.is_real:
        raise InvalidInput("short-pulse formula needs a real pulse")
    if pulse.alpha_sq == 0.0:
        return 0.0
    lo, hi = support(pulse)
    tau_hi = hi * gamma
    f = amplitude_function(pulse, 1.0 / gamma, 1.0 / math.sqrt(gamma))

    def inner(s, tau):
        return 2.0 * math.exp(-0.5 * (tau - s)) * f(tau) * f(s)

    fp, err = integrate.dblquad(inner, 0.0, tau_hi, 0.0, lambda tau: tau,
                                epsabs=1e-13 * pulse.alpha_sq, epsrel=1e-10)
    if not math.isfinite(fp):
        raise QuadratureNotConverged("double quadrature failed", error=err)
    A = area(pulse).real * math.sqrt(gamma)
    return fp + math.sin(A) ** 2


def _pq_system(pulse: PulseSpec, params: PhysicsParams, with_r: bool):
    g = params.gamma
    f = amplitude_function(pulse, 1.0 / g, 1.0 / math.sqrt(g))
    d = params.delta / g

    def rhs(t, s):
        P = complex(s[0], s[1])
        Q = complex(s[2], s[3])
        drive = complex(np.conj(f(t))) * complex(math.cos(d * t), -math.sin(d * t))
        dP = -0.5 * P + drive
        dQ = -0.5 * Q - 0.5 * P
        out = [dP.real, dP.imag, dQ.real, dQ.imag, 16.0 * (dQ.real**2 + dQ.imag**2)]
        if with_r:
            R = dP * P.conjugate()
            out += [R.real, R.imag]
        return out

    tau_end = horizon(pulse, params) * g
    edges = [0.0] + sorted(p * g for p in breakpoints(pulse) if 0 < p * g < tau_end) + [tau_end]
    y = np.zeros(7 if with_r else 5)
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=params.rel_tol * 1e-2,
                        atol=params.abs_tol * 1e-2)
        if sol.status != 0:
            raise SolverFailure(sol.message, t=float(sol.t[-1]) / g)
        y = sol.y[:, -1]
    return y


def qfi_perturbative(pulse: PulseSpec, params: PhysicsParams = PhysicsParams()) -> float:
    """Second-order (long-pulse) Gamma^2 F = 16 int |Q'|^2."""
    if pulse.alpha_sq == 0.0:
        return 0.0
    return float(_pq_system(pulse, params, False)[4])


def qfi_single_photon(pulse: PulseSpec, params: PhysicsParams = PhysicsParams()) -> float:
    """Gamma^2 F of a single photon in the pulse's mode: 16 int|Q'|^2 - 4 |int P' P*|^2."""
    if pulse.alpha_sq == 0.0:
        return 0.0
    y = _pq_system(pulse.scaled(1.0), params, True)
    return float(y[4] - 4.0 * (y[5] ** 2 + y[6] ** 2))


def single_photon_terms(pulse: PulseSpec, params: PhysicsParams = PhysicsParams()) -> tuple[float, float]:
    """(16 int|Q'|^2, 4|int P' P*|^2) for the unit-norm shape."""
    y = _pq_system(pulse.scaled(1.0), params, True)
    return float(y[4]), float(4.0 * (y[5] ** 2 + y[6] ** 2))
