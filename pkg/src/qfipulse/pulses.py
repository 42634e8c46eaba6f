"""Pulse envelopes: standard families, basis expansions and their moments.

A pulse f(t) is stored as a unit-norm *shape* (``family``) together with the
mean photon number ``alpha_sq``, so that ``f = sqrt(alpha_sq) * shape``.
Every family is zero for t < 0. Times are physical (same unit as 1/Gamma).
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import IndexOutOfRange, InvalidInput, QuadratureNotConverged, ZeroVector

# envelope level below which tails are truncated
TAIL_CUTOFF = 1e-14
_LOG_CUTOFF = -math.log(TAIL_CUTOFF)

# default centre offsets, in units of T (see |f(0)|^2 < 1e-12 * peak^2)
GAUSSIAN_T0 = 8.0
RISING_T0 = 30.0
SYMMETRIC_T0 = 15.0


# ---------------------------------------------------------------- bases

@dataclass(frozen=True)
class Harmonic:
    """sqrt(2/T) sin(n pi t / T) on [0, T], n = 1..n_max (closed boundary)."""

    T: float
    n_max: int
    kind = "harmonic"

    def __post_init__(self):
        _check_positive(T=self.T)
        if self.n_max < 1:
            raise InvalidInput("n_max must be >= 1", n_max=self.n_max)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)

    @property
    def window(self) -> tuple[float, float]:
        return 0.0, self.T

    def frequencies(self) -> np.ndarray:
        return self.indices * math.pi / self.T

    def matrix(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        n = self.indices.reshape((-1,) + (1,) * t.ndim)
        out = math.sqrt(2.0 / self.T) * np.sin(n * math.pi * t / self.T)
        return np.where((t >= 0) & (t <= self.T), out, 0.0)

    def variance(self, n: int) -> float:
        return self.T**2 / 12.0 * (1.0 - 6.0 / (n * n * math.pi**2))


@dataclass(frozen=True)
class HermiteGaussian:
    """psi_n((t - t0)/T)/sqrt(T), n = 0..n_max-1, cut to the window [0, 2 t0]."""

    T: float
    n_max: int
    t0: float | None = None
    kind = "hermite_gaussian"

    def __post_init__(self):
        _check_positive(T=self.T)
        if self.n_max < 1:
            raise InvalidInput("n_max must be >= 1", n_max=self.n_max)
        if self.t0 is None:
            # past the last turning point the functions fall below ~1e-14
            object.__setattr__(self, "t0", (math.sqrt(2 * self.n_max - 1) + 8.0) * self.T)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_max)

    @property
    def window(self) -> tuple[float, float]:
        return 0.0, 2.0 * self.t0

    def frequencies(self) -> np.ndarray:
        return np.sqrt(2.0 * self.indices + 1.0) / self.T

    def matrix(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = (t - self.t0) / self.T
        psi = hermite_functions(self.n_max - 1, x) / math.sqrt(self.T)
        inside = (t >= 0) & (t <= 2.0 * self.t0)
        return np.where(inside, psi, 0.0)

    def variance(self, n: int) -> float:
        return (n + 0.5) * self.T**2


@dataclass(frozen=True)
class PlaneWave:
    """exp(i w_n t)/sqrt(T) on [0, T] with w_n = 2 pi n / T (periodic boundary)."""

    T: float
    n_min: int
    n_max: int
    kind = "plane_wave"

    def __post_init__(self):
        _check_positive(T=self.T)
        if self.n_max < self.n_min:
            raise InvalidInput("n_max must be >= n_min", n_min=self.n_min, n_max=self.n_max)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def window(self) -> tuple[float, float]:
        return 0.0, self.T

    def frequencies(self) -> np.ndarray:
        return 2.0 * math.pi * self.indices / self.T

    def matrix(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w = self.frequencies().reshape((-1,) + (1,) * t.ndim)
        out = np.exp(1j * w * t) / math.sqrt(self.T)
        return np.where((t >= 0) & (t <= self.T), out, 0.0)

    def variance(self, n: int) -> float:
        return self.T**2 / 12.0


BasisSpec = Union[Harmonic, HermiteGaussian, PlaneWave]


def hermite_functions(n_top: int, x) -> np.ndarray:
    """Normalised Hermite functions psi_0..psi_n_top at x, stacked on axis 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_top + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_top >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_top):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def basis_eval(basis: BasisSpec, n: int, t):
    """Value of basis function ``n`` at time(s) ``t``."""
    idx = basis.indices
    if n < idx[0] or n > idx[-1] or int(n) != n:
        raise IndexOutOfRange(f"mode {n} outside [{idx[0]}, {idx[-1]}]", n=n)
    row = int(n - idx[0])
    t_arr = np.asarray(t, dtype=float)
    if isinstance(basis, HermiteGaussian):
        x = (t_arr - basis.t0) / basis.T
        val = hermite_functions(row, x)[row] / math.sqrt(basis.T)
        lo, hi = basis.window
        val = np.where((t_arr >= lo) & (t_arr <= hi), val, 0.0)
    else:
        sub = replace(basis, n_max=n) if isinstance(basis, Harmonic) else replace(basis, n_min=n, n_max=n)
        val = sub.matrix(t_arr)[-1]
    if isinstance(basis, PlaneWave):
        return complex(val) if np.ndim(val) == 0 else val
    return float(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------- families

@dataclass(frozen=True)
class Rectangular:
    T: float
    name = "rectangular"

    def __post_init__(self):
        _check_positive(T=self.T)


@dataclass(frozen=True)
class Gaussian:
    T: float
    t0: float | None = None
    name = "gaussian"

    def __post_init__(self):
        _check_positive(T=self.T)
        if self.t0 is None:
            object.__setattr__(self, "t0", GAUSSIAN_T0 * self.T)


@dataclass(frozen=True)
class DecreasingExp:
    T: float
    name = "decreasing_exp"

    def __post_init__(self):
        _check_positive(T=self.T)


@dataclass(frozen=True)
class RisingExp:
    T: float
    t0: float | None = None
    name = "rising_exp"

    def __post_init__(self):
        _check_positive(T=self.T)
        if self.t0 is None:
            object.__setattr__(self, "t0", RISING_T0 * self.T)


@dataclass(frozen=True)
class SymmetricExp:
    T: float
    t0: float | None = None
    name = "symmetric_exp"

    def __post_init__(self):
        _check_positive(T=self.T)
        if self.t0 is None:
            object.__setattr__(self, "t0", SYMMETRIC_T0 * self.T)


@dataclass(frozen=True)
class Sine:
    """Unit-norm sin(omega t) on [0, T]; need not be a harmonic of T."""

    T: float
    omega: float
    name = "sine"

    def __post_init__(self):
        _check_positive(T=self.T)
        if _sine_norm(self.T, self.omega) <= 0.0:
            raise ZeroVector("sin(omega t) vanishes on [0, T]", omega=self.omega)


@dataclass(frozen=True)
class Expansion:
    basis: BasisSpec
    coeffs: tuple
    name = "expansion"

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if len(c) != len(self.basis.indices):
            raise InvalidInput(
                "coefficient count does not match basis size",
                n_coeffs=len(c), n_basis=len(self.basis.indices),
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)


Family = Union[Rectangular, Gaussian, DecreasingExp, RisingExp, SymmetricExp, Sine, Expansion]

FAMILY_ALIASES = {
    "rect": "rectangular", "rectangular": "rectangular",
    "gauss": "gaussian", "gaussian": "gaussian",
    "decexp": "decreasing_exp", "decreasing_exp": "decreasing_exp",
    "risexp": "rising_exp", "rising_exp": "rising_exp",
    "symexp": "symmetric_exp", "symmetric_exp": "symmetric_exp",
    "sine": "sine",
}
STANDARD_FAMILIES = ("rectangular", "gaussian", "decreasing_exp", "rising_exp", "symmetric_exp")
_FAMILY_TYPES = {
    "rectangular": Rectangular, "gaussian": Gaussian, "decreasing_exp": DecreasingExp,
    "rising_exp": RisingExp, "symmetric_exp": SymmetricExp, "sine": Sine,
}
# T_sigma / T for the standard families
SIGMA_OVER_T = {
    "rectangular": 1.0 / math.sqrt(12.0),
    "gaussian": 1.0 / math.sqrt(2.0),
    "decreasing_exp": 1.0,
    "rising_exp": 1.0,
    "symmetric_exp": 1.0 / math.sqrt(2.0),
}


def canonical_family(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in FAMILY_ALIASES:
        raise InvalidInput(f"unknown pulse family {name!r}", family=name)
    return FAMILY_ALIASES[key]


def make_family(name: str, T: float, t0: float | None = None, omega: float | None = None) -> Family:
    fam = canonical_family(name)
    cls = _FAMILY_TYPES[fam]
    if fam == "sine":
        if omega is None:
            raise InvalidInput("sine family needs omega")
        return cls(T, omega)
    if fam in ("gaussian", "rising_exp", "symmetric_exp"):
        return cls(T, t0)
    return cls(T)


@dataclass(frozen=True)
class PulseSpec:
    """Driving envelope with mean photon number ``alpha_sq``.

    ``carrier_detuning`` multiplies the envelope by exp(-i d t) and ``chirp``
    by exp(i beta t^2). For an :class:`Expansion` the coefficients are
    rescaled on construction so that sum |c_n|^2 == alpha_sq.
    """

    family: Family
    alpha_sq: float
    carrier_detuning: float = 0.0
    chirp: float = 0.0

    def __post_init__(self):
        if not (self.alpha_sq >= 0.0 and math.isfinite(self.alpha_sq)):
            raise InvalidInput("alpha_sq must be finite and >= 0", alpha_sq=self.alpha_sq)
        fam = self.family
        if isinstance(fam, Expansion):
            c = fam.array
            norm = float(np.sqrt(np.sum(np.abs(c) ** 2)))
            if norm == 0.0:
                if self.alpha_sq > 0.0:
                    raise ZeroVector("all expansion coefficients vanish")
            else:
                c = c * (math.sqrt(self.alpha_sq) / norm)
            object.__setattr__(self, "family", Expansion(fam.basis, tuple(c)))

    @property
    def alpha(self) -> float:
        return math.sqrt(self.alpha_sq)

    @property
    def is_real(self) -> bool:
        if self.carrier_detuning != 0.0 or self.chirp != 0.0:
            return False
        fam = self.family
        if isinstance(fam, Expansion):
            if isinstance(fam.basis, PlaneWave):
                return bool(np.all(fam.basis.indices[np.abs(fam.array) > 0] == 0)) and bool(
                    np.all(fam.array.imag == 0.0)
                )
            return bool(np.all(fam.array.imag == 0.0))
        return True

    def scaled(self, alpha_sq: float) -> "PulseSpec":
        """Same shape, different photon number."""
        return replace(self, alpha_sq=alpha_sq)

    def __call__(self, t):
        return evaluate(self, t)


def synthesize(basis: BasisSpec, coeffs: Sequence[complex], alpha_sq: float,
               carrier_detuning: float = 0.0) -> PulseSpec:
    """Pulse sum_n c_n xi_n(t) exp(-i d t) with coefficients rescaled to alpha_sq."""
    c = np.asarray(coeffs, dtype=complex)
    if not np.any(c != 0):
        raise ZeroVector("all coefficients vanish")
    return PulseSpec(Expansion(basis, tuple(c)), alpha_sq, carrier_detuning)


# ---------------------------------------------------------------- evaluation

def _sine_norm(T: float, omega: float) -> float:
    if omega == 0.0:
        return 0.0
    return 0.5 * T - math.sin(2.0 * omega * T) / (4.0 * omega)


def _shape(fam: Family, t: np.ndarray) -> np.ndarray:
    """Unit-norm shape at an array of times."""
    if isinstance(fam, Rectangular):
        return np.where((t >= 0) & (t <= fam.T), 1.0 / math.sqrt(fam.T), 0.0)
    if isinstance(fam, Gaussian):
        g = np.exp(-0.5 * ((t - fam.t0) / fam.T) ** 2) / (math.pi**0.25 * math.sqrt(fam.T))
        return np.where((t >= 0) & (t <= fam.t0 + 8.0 * fam.T), g, 0.0)
    if isinstance(fam, DecreasingExp):
        return np.where(t >= 0, np.exp(-0.5 * np.maximum(t, 0.0) / fam.T) / math.sqrt(fam.T), 0.0)
    if isinstance(fam, RisingExp):
        arg = np.minimum(t - fam.t0, 0.0)
        return np.where((t >= 0) & (t <= fam.t0), np.exp(0.5 * arg / fam.T) / math.sqrt(fam.T), 0.0)
    if isinstance(fam, SymmetricExp):
        g = np.exp(-np.abs(t - fam.t0) / fam.T) / math.sqrt(fam.T)
        return np.where(t >= 0, g, 0.0)
    if isinstance(fam, Sine):
        amp = 1.0 / math.sqrt(_sine_norm(fam.T, fam.omega))
        return np.where((t >= 0) & (t <= fam.T), amp * np.sin(fam.omega * t), 0.0)
    if isinstance(fam, Expansion):
        return np.tensordot(fam.array, fam.basis.matrix(t), axes=(0, 0))
    raise InvalidInput(f"unsupported family {type(fam).__name__}")


def evaluate(spec: PulseSpec, t):
    """f(t), carrier phase included; zero outside the support."""
    t_arr = np.asarray(t, dtype=float)
    fam = spec.family
    if isinstance(fam, Expansion):
        val = _shape(fam, t_arr).astype(complex)  # coefficients already carry alpha
    else:
        val = spec.alpha * _shape(fam, t_arr).astype(complex)
    if spec.carrier_detuning or spec.chirp:
        val = val * np.exp(1j * (spec.chirp * t_arr**2 - spec.carrier_detuning * t_arr))
    return complex(val) if val.ndim == 0 else val


def amplitude_function(spec: PulseSpec, time_scale: float = 1.0,
                       amp_scale: float = 1.0) -> Callable[[float], complex]:
    """Fast scalar callable ``tau -> amp_scale * f(tau * time_scale)``.

    Used by the ODE right-hand sides, where per-call numpy overhead matters.
    """
    fam = spec.family
    a = spec.alpha * amp_scale
    s = time_scale
    carrier = spec.carrier_detuning * s
    chirp = spec.chirp * s * s
    phased = bool(carrier or chirp)

    if isinstance(fam, Rectangular):
        T = fam.T / s
        amp = a / math.sqrt(fam.T)

        def env(tau):
            return amp if 0.0 <= tau <= T else 0.0
    elif isinstance(fam, Gaussian):
        t0, w, end = fam.t0 / s, fam.T / s, (fam.t0 + 8.0 * fam.T) / s
        amp = a / (math.pi**0.25 * math.sqrt(fam.T))

        def env(tau):
            if tau < 0.0 or tau > end:
                return 0.0
            u = (tau - t0) / w
            return amp * math.exp(-0.5 * u * u)
    elif isinstance(fam, DecreasingExp):
        w = fam.T / s
        amp = a / math.sqrt(fam.T)

        def env(tau):
            return amp * math.exp(-0.5 * tau / w) if tau >= 0.0 else 0.0
    elif isinstance(fam, RisingExp):
        t0, w = fam.t0 / s, fam.T / s
        amp = a / math.sqrt(fam.T)

        def env(tau):
            return amp * math.exp(0.5 * (tau - t0) / w) if 0.0 <= tau <= t0 else 0.0
    elif isinstance(fam, SymmetricExp):
        t0, w = fam.t0 / s, fam.T / s
        amp = a / math.sqrt(fam.T)

        def env(tau):
            return amp * math.exp(-abs(tau - t0) / w) if tau >= 0.0 else 0.0
    elif isinstance(fam, Sine):
        T, om = fam.T / s, fam.omega * s
        amp = a / math.sqrt(_sine_norm(fam.T, fam.omega))

        def env(tau):
            return amp * math.sin(om * tau) if 0.0 <= tau <= T else 0.0
    elif isinstance(fam, Expansion):
        c = fam.array * amp_scale
        basis = fam.basis
        lo, hi = basis.window
        hi /= s
        if isinstance(basis, Harmonic):
            k = basis.indices * math.pi / basis.T * s
            cr = c.real * math.sqrt(2.0 / basis.T)
            ci = c.imag * math.sqrt(2.0 / basis.T)
            real_only = not np.any(ci)

            def env(tau):
                if tau < 0.0 or tau > hi:
                    return 0.0
                sv = np.sin(k * tau)
                if real_only:
                    return float(cr @ sv)
                return complex(cr @ sv, ci @ sv)
        elif isinstance(basis, PlaneWave):
            w = basis.frequencies() * s
            cc = c / math.sqrt(basis.T)

            def env(tau):
                if tau < 0.0 or tau > hi:
                    return 0.0
                return complex(cc @ np.exp(1j * w * tau))
        else:
            def env(tau):
                if tau < 0.0 or tau > hi:
                    return 0.0
                return complex(c @ basis.matrix(tau * s))
    else:
        raise InvalidInput(f"unsupported family {type(fam).__name__}")

    if not phased:
        return env

    def f(tau):
        return env(tau) * cmath.exp(1j * (chirp * tau * tau - carrier * tau))

    return f


# ---------------------------------------------------------------- support

def support(spec: PulseSpec) -> tuple[float, float]:
    """[start, end] outside which the envelope is zero or below the tail cutoff."""
    fam = spec.family
    if isinstance(fam, (Rectangular, Sine)):
        return 0.0, fam.T
    if isinstance(fam, Gaussian):
        return 0.0, fam.t0 + 8.0 * fam.T
    if isinstance(fam, DecreasingExp):
        return 0.0, 2.0 * _LOG_CUTOFF * fam.T
    if isinstance(fam, RisingExp):
        return 0.0, fam.t0
    if isinstance(fam, SymmetricExp):
        return 0.0, fam.t0 + _LOG_CUTOFF * fam.T
    if isinstance(fam, Expansion):
        return fam.basis.window
    raise InvalidInput(f"unsupported family {type(fam).__name__}")


def breakpoints(spec: PulseSpec) -> list[float]:
    """Interior times where f or its derivative jumps, plus the support end."""
    fam = spec.family
    _, end = support(spec)
    pts = [end]
    if isinstance(fam, SymmetricExp):
        pts.append(fam.t0)
    return sorted(set(p for p in pts if p > 0.0))


def _quad_edges(spec: PulseSpec) -> np.ndarray:
    """Sub-interval edges small enough for quad to resolve every feature."""
    fam = spec.family
    lo, hi = support(spec)
    if isinstance(fam, Expansion):
        w_max = float(np.max(np.abs(fam.basis.frequencies()))) if len(fam.coeffs) else 0.0
        scale = fam.basis.T if isinstance(fam.basis, HermiteGaussian) else hi - lo
        pieces = int(np.ceil((hi - lo) * w_max / math.pi)) + int(np.ceil((hi - lo) / scale)) * 4
    elif isinstance(fam, Sine):
        pieces = int(np.ceil(fam.T * abs(fam.omega) / math.pi)) + 1
    else:
        pieces = int(np.ceil((hi - lo) / fam.T)) * 2
    # chirp / carrier oscillations
    w_extra = abs(spec.carrier_detuning) + 2.0 * abs(spec.chirp) * hi
    pieces += int(np.ceil((hi - lo) * w_extra / math.pi))
    pieces = max(pieces, 1)
    edges = np.linspace(lo, hi, pieces + 1)
    extra = [p for p in breakpoints(spec) if lo < p < hi]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    return edges


def integrate_pulse(spec: PulseSpec, fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    complex_result: bool = False):
    """Adaptive Gauss-Kronrod quadrature of ``fun(t, f(t))`` over the support."""
    edges = _quad_edges(spec)
    epsabs = 1e-12 * max(spec.alpha_sq, 1e-300) / max(len(edges) - 1, 1)
    total = 0.0 + 0.0j

    def part(g, a, b):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(g, a, b, epsabs=epsabs, epsrel=1e-10, limit=200)
            except integrate.IntegrationWarning as exc:
                raise QuadratureNotConverged(str(exc).strip(), interval=[a, b]) from None
        return val

    for a, b in zip(edges[:-1], edges[1:]):
        re = part(lambda t: float(np.real(fun(t, evaluate(spec, t)))), a, b)
        im = part(lambda t: float(np.imag(fun(t, evaluate(spec, t)))), a, b) if complex_result else 0.0
        total += complex(re, im)
    return total if complex_result else total.real


def norm_sq(spec: PulseSpec) -> float:
    """Quadrature value of the integral of |f|^2."""
    if spec.alpha_sq == 0.0:
        return 0.0
    return integrate_pulse(spec, lambda t, f: abs(f) ** 2)


def variance(spec: PulseSpec) -> float:
    """Temporal standard deviation T_sigma of |f|^2 / alpha_sq."""
    n0 = norm_sq(spec)
    if n0 == 0.0:
        raise ZeroVector("variance of a zero pulse is undefined")
    mean = integrate_pulse(spec, lambda t, f: t * abs(f) ** 2) / n0
    var = integrate_pulse(spec, lambda t, f: (t - mean) ** 2 * abs(f) ** 2) / n0
    return math.sqrt(var)


def area(spec: PulseSpec) -> complex:
    """A = integral of f(t) dt."""
    if spec.alpha_sq == 0.0:
        return 0j
    return integrate_pulse(spec, lambda t, f: f, complex_result=True)


def standard_pulse(family: str, gamma_T_sigma: float, alpha_sq: float, gamma: float = 1.0) -> PulseSpec:
    """Standard-family pulse of a given dimensionless width Gamma*T_sigma."""
    fam = canonical_family(family)
    if fam not in SIGMA_OVER_T:
        raise InvalidInput(f"{family!r} is not a standard family")
    T = gamma_T_sigma / SIGMA_OVER_T[fam] / gamma
    return PulseSpec(make_family(fam, T), alpha_sq)


# ---------------------------------------------------------------- JSON

def basis_to_dict(basis: BasisSpec) -> dict:
    d = {"kind": basis.kind, "T": basis.T, "n_max": basis.n_max}
    if isinstance(basis, HermiteGaussian):
        d["t0"] = basis.t0
    if isinstance(basis, PlaneWave):
        d["n_min"] = basis.n_min
    return d


def basis_from_dict(d: dict) -> BasisSpec:
    kind = str(d.get("kind", "")).lower().replace("-", "_")
    if kind in ("harmonic", "sine"):
        return Harmonic(float(d["T"]), int(d["n_max"]))
    if kind in ("hermite_gaussian", "hermite"):
        return HermiteGaussian(float(d["T"]), int(d["n_max"]), d.get("t0"))
    if kind in ("plane_wave", "planewave"):
        return PlaneWave(float(d["T"]), int(d["n_min"]), int(d["n_max"]))
    raise InvalidInput(f"unknown basis kind {kind!r}")


def to_dict(spec: PulseSpec) -> dict:
    fam = spec.family
    out: dict = {}
    if isinstance(fam, Expansion):
        out["basis"] = basis_to_dict(fam.basis)
        out["coeffs"] = [[c.real, c.imag] for c in fam.coeffs]
    else:
        params = {"T": fam.T}
        if hasattr(fam, "t0"):
            params["t0"] = fam.t0
        if isinstance(fam, Sine):
            params["omega"] = fam.omega
        out["family"] = fam.name
        out["params"] = params
    out["alpha_sq"] = spec.alpha_sq
    out["carrier_detuning"] = spec.carrier_detuning
    if spec.chirp:
        out["chirp"] = spec.chirp
    return out


def from_dict(d: dict) -> PulseSpec:
    detune = float(d.get("carrier_detuning", 0.0))
    chirp = float(d.get("chirp", 0.0))
    if "basis" in d:
        basis = basis_from_dict(d["basis"])
        coeffs = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in d["coeffs"]]
        alpha_sq = d.get("alpha_sq")
        if alpha_sq is None:
            alpha_sq = float(sum(abs(c) ** 2 for c in coeffs))
        return PulseSpec(Expansion(basis, tuple(coeffs)), float(alpha_sq), detune, chirp)
    if "family" not in d:
        raise InvalidInput("pulse JSON needs 'family' or 'basis'")
    params = dict(d.get("params", {}))
    fam = make_family(d["family"], float(params["T"]), params.get("t0"), params.get("omega"))
    return PulseSpec(fam, float(d["alpha_sq"]), detune, chirp)


def _check_positive(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise InvalidInput(f"{k} must be positive and finite", **{k: v})
