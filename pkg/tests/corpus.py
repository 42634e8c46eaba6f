"""Shared regression pulses with frozen reference values."""
import numpy as np

from qfipulse.engine import PhysicsParams
from qfipulse.pulses import Expansion, Gaussian, Harmonic, PlaneWave, PulseSpec, Rectangular, Sine


def random_harmonic(T=6.0, n=5, alpha_sq=0.5, seed=7):
    c = np.random.default_rng(seed).standard_normal(n)
    return PulseSpec(Expansion(Harmonic(T, n), tuple(c)), alpha_sq)


def detuned_plane_wave(alpha_sq=0.3, seed=11):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    return PulseSpec(Expansion(PlaneWave(10.0, -2, 2), tuple(c)), alpha_sq)


# name -> (pulse, params)
CORPUS = {
    "rect": (PulseSpec(Rectangular(1.0), 1e-4), PhysicsParams()),
    "rect_strong": (PulseSpec(Rectangular(1.0), 1.0), PhysicsParams()),
    "gauss": (PulseSpec(Gaussian(1.0), 1.0), PhysicsParams()),
    "sine_half_gamma": (PulseSpec(Sine(50.0, 0.5), 1e-4), PhysicsParams()),
    "harmonic5": (random_harmonic(), PhysicsParams()),
    "plane_wave_detuned": (detuned_plane_wave(), PhysicsParams(delta=0.4)),
    "chirped_rect": (PulseSpec(Rectangular(4.0), 0.5, chirp=0.2), PhysicsParams()),
}
