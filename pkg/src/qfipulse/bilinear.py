"""Long-pulse QFI as a Hermitian form F = c^H K c over basis coefficients.

All matrices are returned as Gamma^2 K (dimensionless); with c carrying alpha
the quadratic form gives Gamma^2 F directly. r = Gamma T / pi throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .engine import PhysicsParams
from .errors import EigenFailure, InvalidInput, SolverFailure
from .pulses import BasisSpec, Harmonic, HermiteGaussian, PlaneWave

PI = math.pi


@dataclass
class KMatrix:
    entries: np.ndarray
    basis: BasisSpec | None = None
    gamma: float = 1.0
    delta: float = 0.0
    provenance: dict = field(default_factory=dict)

    @property
    def indices(self) -> np.ndarray:
        if self.basis is None:
            return np.arange(self.entries.shape[0])
        return self.basis.indices

    def quadratic(self, c) -> float:
        c = np.asarray(c)
        return float(np.real(np.conj(c) @ self.entries @ c))


@dataclass
class EigenResult:
    lambda_max: float
    vector: np.ndarray
    mode_populations: np.ndarray
    indices: np.ndarray
    eigenvalues: np.ndarray
    degenerate: list = field(default_factory=list)  # every eigenvalue tied with the top

    @property
    def top_mode(self) -> int:
        return int(self.indices[int(np.argmax(self.mode_populations))])


# ---------------------------------------------------------------- closed forms

def k_harmonic_closed(r: float, n_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact K1, K2, K3 for the sine basis (K1, K3 not symmetric as printed)."""
    if r <= 0 or n_max < 1:
        raise InvalidInput("need r > 0 and n_max >= 1", r=r, n_max=n_max)
    n = np.arange(1, n_max + 1, dtype=float)
    m, k = n[:, None], n[None, :]
    E = math.exp(-PI * r / 2)
    sm, sk = (-1.0) ** m, (-1.0) ** k
    dm, dk = 4 * m * m + r * r, 4 * k * k + r * r
    off = m != k
    diff = np.where(off, m * m - k * k, 1.0)

    K1 = 16 * m * k * r / (PI * dm) * (4 / dk * (1 - sk * E) + (1 - sm * sk) / diff)
    K2 = 32 * m * k * r / (PI * dm * dk) * ((1 - E * E) + (sm - E) * (sk - E))
    K3 = 64 * m * k * r**2 * (
        r * (dk**2 - sm * sk * dm**2)
        + sm * E * (m * m - k * k) * (4 * k * k * r * (4 + PI * r) + r**3 * (8 + PI * r)
                                     + 4 * m * m * (4 * k * k * PI + r * (4 + PI * r)))
    ) / (PI * diff * dm**2 * dk**2)

    sn, dn = (-1.0) ** n, 4 * n * n + r * r
    np.fill_diagonal(K1, 4 * r / dn**2 * (r**3 + 4 * n * n / PI * (4 - 4 * sn * E + r * PI)))
    np.fill_diagonal(K2, 4 * r * (PI * r**3 + 4 * n * n * (2 - 2 * E * E + PI * r)) / (PI * dn**2)
                     + 32 * (sn - E) ** 2 * n * n * r / (PI * dn**2))
    np.fill_diagonal(K3, 8 * r**2 / (PI * dn**3) * (8 * E * sn * n * n * (4 * n * n * PI + r * (8 + PI * r))
                                                   + (16 * n**4 * PI - 64 * n * n * r - PI * r**4)))
    return K1, K2, K3


def k_planewave_closed(r: float, n_min: int, n_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hermitian parts K1^H, K2, K3^H for the periodic plane-wave basis at zero detuning."""
    if r <= 0 or n_max < n_min:
        raise InvalidInput("need r > 0 and n_max >= n_min", r=r)
    n = np.arange(n_min, n_max + 1, dtype=float)
    m, k = n[:, None], n[None, :]
    E = math.exp(-PI * r / 2)
    dm, dk = 16 * m * m + r * r, 16 * k * k + r * r
    off = m != k
    diff = np.where(off, m - k, 1.0)

    K1 = (8 * r * (16 * m * k - r * r) / (PI * dm * dk) * (1 - E)).astype(complex)
    a, b = r - 4j * m, r + 4j * k
    K2 = 2 * r / (PI * a * b) * (2 - 2 * E * E + 4 * r * (E - 1) / (r + 4j * m) + 4 * r * (E - 1) / (r - 4j * k)) \
        + 4 * r * (1 - E) ** 2 / (PI * a * b)
    K3 = (8 * r**2 * E / (PI * diff) * ((16 * k**3 * PI + k * r * (4 + PI * r)) / dk**2
                                       - m * (16 * m * m * PI + r * (4 + PI * r)) / dm**2)
          + 32 * r**3 / (PI * diff) * (m / dm**2 - k / dk**2)).astype(complex)

    dn = 16 * n * n + r * r
    np.fill_diagonal(K1, (4 * r**3 * (PI * r - 2 + 2 * E) + 64 * n * n * r * (PI * r + 2 - 2 * E)) / (PI * dn**2))
    np.fill_diagonal(K2, (4 * r**3 * (4 * E - E * E + PI * r - 3) + 64 * n * n * r * (1 + PI * r - E * E))
                     / (PI * dn**2) + 4 * r * (1 - E) ** 2 / (PI * dn))
    np.fill_diagonal(K3, -8 * r**2 / (PI * dn**3) * (-256 * (E + 1) * n**4 * PI + 192 * (1 - E) * n * n * r
                                                   + r**3 * (4 * E + PI * r * E + PI * r - 4)))
    return K1, K2, K3


def closed_total(basis: Harmonic | PlaneWave, gamma: float = 1.0) -> KMatrix:
    """Sum of the Hermitian parts of the three closed-form matrices."""
    r = gamma * basis.T / PI
    if isinstance(basis, Harmonic):
        parts = k_harmonic_closed(r, basis.n_max)
        tag = "closed_harmonic"
    elif isinstance(basis, PlaneWave):
        parts = k_planewave_closed(r, basis.n_min, basis.n_max)
        tag = "closed_plane_wave"
    else:
        raise InvalidInput("closed forms exist only for harmonic and plane-wave bases")
    K = sum(hermitian_part(P) for P in parts)
    return KMatrix(K, basis, gamma, 0.0, {"kind": tag, "r": r})


def asymptotic_lambda(n_tilde, bc: str = "closed"):
    """Large-r eigenvalue of Gamma^2 K for mode n~ = n / r."""
    x = np.asarray(n_tilde, dtype=float)
    if bc == "closed":
        out = 64 * x * x / (4 * x * x + 1) ** 2
    elif bc == "periodic":
        out = 256 * x * x / (16 * x * x + 1) ** 2
    else:
        raise InvalidInput("bc must be 'closed' or 'periodic'", bc=bc)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- numeric kernel

def k_numeric(basis: BasisSpec, params: PhysicsParams = PhysicsParams()) -> KMatrix:
    """K_mn = 16 int eta_m' conj(eta_n') dt from the per-mode linear response.

    phi_n' = -phi_n/2 + e^{-i d t} conj(xi_n),  eta_n' = -eta_n/2 - phi_n/2
    (Gamma = 1). The upper triangle of K is carried as extra ODE states so
    the integral shares the solver's error control.
    """
    g = params.gamma
    d = params.delta / g
    idx = basis.indices
    N = len(idx)
    iu, ju = np.triu_indices(N)
    lo, hi = basis.window
    hi_tau = hi * g
    tau_end = hi_tau + params.horizon_factor
    real = (not isinstance(basis, PlaneWave)) and d == 0.0
    dtype = float if real else complex
    scale = 1.0 / math.sqrt(g)

    def rhs(t, y):
        phi, eta = y[:N], y[N:2 * N]
        if t <= hi_tau:
            drive = np.conj(basis.matrix(t / g)) * scale
            if d:
                drive = drive * np.exp(-1j * d * t)
        else:
            drive = 0.0
        dphi = -0.5 * phi + drive
        deta = -0.5 * eta - 0.5 * phi
        return np.concatenate([dphi, deta, 16.0 * deta[iu] * np.conj(deta[ju])])

    y = np.zeros(2 * N + iu.size, dtype=dtype)
    for a, b in ((lo * g, hi_tau), (hi_tau, tau_end)):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=params.rel_tol * 1e-3,
                        atol=params.abs_tol * 1e-2)
        if sol.status != 0:
            raise SolverFailure(sol.message, t=float(sol.t[-1]) / g)
        y = sol.y[:, -1]
    K = np.zeros((N, N), dtype=dtype)
    K[iu, ju] = y[2 * N:]
    K[ju, iu] = np.conj(y[2 * N:])
    return KMatrix(K, basis, g, params.delta, {"kind": "numeric"})


# ---------------------------------------------------------------- eigen

def hermitian_part(K):
    if isinstance(K, KMatrix):
        return KMatrix(hermitian_part(K.entries), K.basis, K.gamma, K.delta, dict(K.provenance))
    K = np.asarray(K)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidInput("K must be square")
    return 0.5 * (K + K.conj().T)


def _preference(basis, indices, delta_shift=0.0):
    """Sort key for tie-breaking: positive frequency first, then lowest index."""
    if isinstance(basis, PlaneWave):
        w = basis.frequencies()
        return [(0 if wi > 0 else 1, k) for k, wi in enumerate(w)]
    return [(0, k) for k in range(len(indices))]


def max_eig(K, degeneracy_tol: float = 1e-9) -> EigenResult:
    """Top eigenpair of the Hermitian part, with a deterministic phase.

    Ties within ``degeneracy_tol`` (relative) are resolved by projecting the
    preferred basis mode onto the degenerate eigenspace.
    """
    km = K if isinstance(K, KMatrix) else KMatrix(np.asarray(K))
    H = hermitian_part(km.entries)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    if not np.all(np.isfinite(w)):
        raise EigenFailure("non-finite eigenvalues")
    top = w[-1]
    tie = np.abs(w - top) <= degeneracy_tol * max(abs(top), 1e-300)
    Vd = V[:, tie]
    if Vd.shape[1] == 1:
        v = Vd[:, 0]
    else:
        weight = np.sum(np.abs(Vd) ** 2, axis=1)
        best = weight.max()
        cands = [k for k in range(len(weight)) if weight[k] >= best * (1 - 1e-9)]
        pref = _preference(km.basis, km.indices)
        j = min(cands, key=lambda k: pref[k])
        v = Vd @ np.conj(Vd[j, :])
    v = v / np.linalg.norm(v)
    j = int(np.argmax(np.abs(v)))
    v = v * (np.conj(v[j]) / abs(v[j]))
    if np.all(np.abs(v.imag) < 1e-14 * np.abs(v).max()):
        v = v.real
    pops = np.abs(v) ** 2
    return EigenResult(float(top), v, pops, km.indices, w, [float(x) for x in w[tie]])
