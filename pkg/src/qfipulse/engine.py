"""Long-time global QFI from the coupled Bloch/sensitivity ODEs.

Internally everything runs in units where Gamma = 1: tau = Gamma t,
f~(tau) = f(t)/sqrt(Gamma), delta~ = delta/Gamma.  The integrated F~ is then
Gamma^2 F directly.  The excited population is carried as u = 1 + z so that
weak pulses (u ~ alpha^2) do not lose digits against z = -1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import HorizonNotConverged, InvalidInput, SolverFailure
from .pulses import PulseSpec, amplitude_function, breakpoints, support

METHOD = "DOP853"
MAX_HORIZON_DOUBLINGS = 2  # factor grows at most 4x


@dataclass(frozen=True)
class PhysicsParams:
    gamma: float = 1.0
    delta: float = 0.0
    horizon_factor: float = 60.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidInput("gamma must be positive", gamma=self.gamma)
        if self.horizon_factor < 20:
            raise InvalidInput("horizon_factor must be >= 20", horizon_factor=self.horizon_factor)
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidInput("tolerances must be positive")


@dataclass
class QfiBreakdown:
    """Gamma^2 F at t_end plus its split.

    Real case: ``f_p + f_z + f_x == total``.  Complex case:
    ``z1_term + work_term == total`` and the real-case fields are None.
    """

    total: float
    gamma: float
    t_end: float
    f_p: Optional[float] = None
    f_z: Optional[float] = None
    f_x: Optional[float] = None
    z1_term: Optional[float] = None
    work_term: Optional[float] = None
    trajectory: Optional[dict] = None
    solver: dict = field(default_factory=dict)

    @property
    def qfi(self) -> float:
        """F in physical units (time^2)."""
        return self.total / self.gamma**2

    def to_dict(self, with_trajectory: bool = False) -> dict:
        out = {
            "qfi_total": self.total,
            "qfi_physical": self.qfi,
            "f_p": self.f_p, "f_z": self.f_z, "f_x": self.f_x,
            "z1_term": self.z1_term, "work_term": self.work_term,
            "gamma": self.gamma, "t_end": self.t_end,
            "solver": self.solver,
        }
        if with_trajectory and self.trajectory is not None:
            out["trajectory"] = {k: np.asarray(v).tolist() for k, v in self.trajectory.items()}
        return out


def horizon(pulse: PulseSpec, params: PhysicsParams) -> float:
    """End of pulse support plus horizon_factor / Gamma (physical time)."""
    return support(pulse)[1] + params.horizon_factor / params.gamma


# --------------------------------------------------------------- right-hand sides

def _real_rhs(f):
    def rhs(t, s):
        x, u, xi, F, a, b, Fp, Fz, Fx = s
        ft = f(t)
        return [
            -0.5 * x + 2.0 * ft * (u - 1.0),
            -u - 2.0 * ft * x,
            -0.5 * xi + 0.25 * x + 0.5 * ft,
            0.5 * u + 4.0 * ft * xi,
            -0.5 * a + ft,
            -0.5 * b + x,
            2.0 * ft * a,
            0.5 * u,
            ft * b,
        ]
    return rhs


def _complex_rhs(f, d):
    def rhs(t, s):
        x1, y1, u1, w1, x2, y2, z2, w2, G = s
        ft = f(t)
        fr, fi = ft.real, ft.imag
        z1 = u1 - 1.0
        return [
            -0.5 * x1 + 2.0 * fr * z1 - d * y1,
            -0.5 * y1 - 2.0 * fi * z1 + d * x1,
            -u1 - 2.0 * fr * x1 + 2.0 * fi * y1,
            0.5 * (fi * x1 + fr * y1),
            -0.5 * x2 + 2.0 * fr * z2 - d * y2 - 0.25 * y1 + 0.5 * fi,
            -0.5 * y2 - 2.0 * fi * z2 + d * x2 + 0.25 * x1 + 0.5 * fr,
            -z2 - 2.0 * fr * x2 + 2.0 * fi * y2 - w1,
            0.5 * (fi * x2 + fr * y2),
            0.5 * u1,
        ]
    return rhs


def _segments(pulse: PulseSpec, gamma: float, tau_end: float) -> list[float]:
    pts = [p * gamma for p in breakpoints(pulse) if 0.0 < p * gamma < tau_end]
    return [0.0] + sorted(pts) + [tau_end]


def _run(rhs, y0, edges, rtol, atol, keep):
    """Integrate over consecutive segments, restarting at every edge."""
    y = np.asarray(y0, dtype=float)
    ts, ys = [np.array([edges[0]])], [y[:, None]]
    nfev = 0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        sol = solve_ivp(rhs, (a, b), y, method=METHOD, rtol=rtol, atol=atol)
        nfev += sol.nfev
        if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
            raise SolverFailure(sol.message, t=float(sol.t[-1]), segment=[a, b])
        y = sol.y[:, -1]
        if keep:
            ts.append(sol.t[1:])
            ys.append(sol.y[:, 1:])
    return y, np.concatenate(ts), np.concatenate(ys, axis=1), nfev


def _solve(pulse, params, rhs, y0, fdot, with_trajectory):
    g = params.gamma
    factor = params.horizon_factor
    tau_end = horizon(pulse, params) * g
    edges = _segments(pulse, g, tau_end)
    y, ts, ys, nfev = _run(rhs, y0, edges, params.rel_tol, params.abs_tol, True)
    doublings = 0
    while abs(fdot(y)) > params.abs_tol:
        if doublings == MAX_HORIZON_DOUBLINGS:
            raise HorizonNotConverged(
                "QFI still changing at the end of the horizon",
                dF=float(fdot(y)), horizon_factor=factor,
            )
        doublings += 1
        new_end = tau_end + factor  # doubling the factor extends by factor/Gamma
        factor *= 2.0
        y, t2, y2, n2 = _run(rhs, y, [tau_end, new_end], params.rel_tol, params.abs_tol, True)
        ts, ys, nfev, tau_end = np.concatenate([ts, t2[1:]]), np.hstack([ys, y2[:, 1:]]), nfev + n2, new_end
    info = {
        "method": METHOD, "rel_tol": params.rel_tol, "abs_tol": params.abs_tol,
        "nfev": int(nfev), "horizon_factor": factor, "n_steps": int(ts.size - 1),
    }
    return y, ts, ys, tau_end, info


def _check_real(pulse: PulseSpec, params: PhysicsParams):
    if params.delta != 0.0:
        raise InvalidInput("solve_real needs zero detuning", delta=params.delta)
    if not pulse.is_real:
        raise InvalidInput("solve_real needs a real pulse without carrier phase")


def solve_real(pulse: PulseSpec, params: PhysicsParams = PhysicsParams(),
               with_trajectory: bool = False) -> QfiBreakdown:
    """Four-ODE system for real pulses at zero detuning, with the F_p/F_z/F_x split."""
    _check_real(pulse, params)
    g = params.gamma
    f = amplitude_function(pulse, time_scale=1.0 / g, amp_scale=1.0 / math.sqrt(g))
    y0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    y, ts, ys, tau_end, info = _solve(pulse, params, _real_rhs(f), y0, lambda s: 0.5 * s[1], with_trajectory)
    x, u, xi, F, a, b, Fp, Fz, Fx = y
    info["bloch_max"] = float(np.max(ys[0] ** 2 + (ys[1] - 1.0) ** 2))
    info["xi_split_residual"] = float(np.max(np.abs(ys[2] - (0.25 * ys[5] + 0.5 * ys[4]))))
    info["split_residual"] = float(abs(Fp + Fz + Fx - F))
    traj = None
    if with_trajectory:
        traj = {"t": ts / g, "x": ys[0], "z": ys[1] - 1.0, "xi": ys[2] / g, "F": ys[3] / g**2,
                "F_p": ys[6] / g**2, "F_z": ys[7] / g**2, "F_x": ys[8] / g**2}
    return QfiBreakdown(total=float(F), gamma=g, t_end=tau_end / g, f_p=float(Fp),
                        f_z=float(Fz), f_x=float(Fx), trajectory=traj, solver=info)


def solve_complex(pulse: PulseSpec, params: PhysicsParams = PhysicsParams(),
                  with_trajectory: bool = False) -> QfiBreakdown:
    """Nine-ODE system for complex pulses and any detuning.

    Result is the compact form  integral of (1+z1)/2  +  4 (2 w2 - w1^2).
    """
    g = params.gamma
    f = amplitude_function(pulse, time_scale=1.0 / g, amp_scale=1.0 / math.sqrt(g))
    d = params.delta / g
    y0 = np.zeros(9)
    y, ts, ys, tau_end, info = _solve(pulse, params, _complex_rhs(f, d), y0, lambda s: 0.5 * s[2], with_trajectory)
    x1, y1, u1, w1, x2, y2, z2, w2, G = y
    work = 4.0 * (2.0 * w2 - w1 * w1)
    info["bloch_max"] = float(np.max(ys[0] ** 2 + ys[1] ** 2 + (ys[2] - 1.0) ** 2))
    traj = None
    if with_trajectory:
        traj = {"t": ts / g, "x1": ys[0], "y1": ys[1], "z1": ys[2] - 1.0, "w1": ys[3],
                "x2": ys[4] / g, "y2": ys[5] / g, "z2": ys[6] / g, "w2": ys[7] / g,
                "F": (ys[8] + 4.0 * (2.0 * ys[7] - ys[3] ** 2)) / g**2}
    return QfiBreakdown(total=float(G + work), gamma=g, t_end=tau_end / g,
                        z1_term=float(G), work_term=float(work), trajectory=traj, solver=info)


def solve(pulse: PulseSpec, params: PhysicsParams = PhysicsParams(),
          with_trajectory: bool = False) -> QfiBreakdown:
    """Real system when the input allows it, complex system otherwise."""
    if params.delta == 0.0 and pulse.is_real:
        return solve_real(pulse, params, with_trajectory)
    return solve_complex(pulse, params, with_trajectory)


def trajectory_csv(result: QfiBreakdown) -> str:
    if result.trajectory is None:
        raise InvalidInput("result has no trajectory")
    keys = list(result.trajectory)
    cols = np.column_stack([np.asarray(result.trajectory[k], dtype=float) for k in keys])
    lines = [",".join(keys)]
    lines += [",".join(f"{v:.12g}" for v in row) for row in cols]
    return "\n".join(lines) + "\n"
