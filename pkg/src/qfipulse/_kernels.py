"""Compiled fixed-step RK4 kernels for batches of pulses.

Every system j in a batch uses the pulse f0 + s_j * D[p_j] sampled on a
half-step grid; j = 0 is the unperturbed pulse, j = 1..P adds +h along row
p = j-1 of D and j = P+1..2P subtracts it. The returned value is Gamma^2 F
at the end of the pulse plus the exact decay tail.
"""
import os

import numpy as np
from numba import config, njit, prange

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # the system TBB is often too old for numba; prefer OpenMP quietly
    config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True)
def _real_rhs(f, x, u, xi):
    dx = -0.5 * x + 2.0 * f * (u - 1.0)
    du = -u - 2.0 * f * x
    dxi = -0.5 * xi + 0.25 * x + 0.5 * f
    dF = 0.5 * u + 4.0 * f * xi
    return dx, du, dxi, dF


@njit(cache=True)
def _real_one(f0, D, p, sgn, dt, nsteps):
    x = 0.0
    u = 0.0
    xi = 0.0
    F = 0.0
    for s in range(nsteps):
        k = 2 * s
        fa = f0[k] + sgn * D[p, k]
        fm = f0[k + 1] + sgn * D[p, k + 1]
        fb = f0[k + 2] + sgn * D[p, k + 2]
        a1, b1, c1, d1 = _real_rhs(fa, x, u, xi)
        h = 0.5 * dt
        a2, b2, c2, d2 = _real_rhs(fm, x + h * a1, u + h * b1, xi + h * c1)
        a3, b3, c3, d3 = _real_rhs(fm, x + h * a2, u + h * b2, xi + h * c2)
        a4, b4, c4, d4 = _real_rhs(fb, x + dt * a3, u + dt * b3, xi + dt * c3)
        w = dt / 6.0
        x += w * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        u += w * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        xi += w * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        F += w * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    return F + 0.5 * u


@njit(parallel=True, cache=True)
def batch_real(f0, D, h, dt, nsteps, n_sys):
    P = D.shape[0]
    out = np.empty(n_sys)
    for j in prange(n_sys):
        if j == 0:
            out[j] = _real_one(f0, D, 0, 0.0, dt, nsteps)
        elif j <= P:
            out[j] = _real_one(f0, D, j - 1, h, dt, nsteps)
        else:
            out[j] = _real_one(f0, D, j - 1 - P, -h, dt, nsteps)
    return out


@njit(cache=True)
def _cplx_rhs(fr, fi, d, s, out):
    x1, y1, u1, w1, x2, y2, z2 = s[0], s[1], s[2], s[3], s[4], s[5], s[6]
    z1 = u1 - 1.0
    out[0] = -0.5 * x1 + 2.0 * fr * z1 - d * y1
    out[1] = -0.5 * y1 - 2.0 * fi * z1 + d * x1
    out[2] = -u1 - 2.0 * fr * x1 + 2.0 * fi * y1
    out[3] = 0.5 * (fi * x1 + fr * y1)
    out[4] = -0.5 * x2 + 2.0 * fr * z2 - d * y2 - 0.25 * y1 + 0.5 * fi
    out[5] = -0.5 * y2 - 2.0 * fi * z2 + d * x2 + 0.25 * x1 + 0.5 * fr
    out[6] = -z2 - 2.0 * fr * x2 + 2.0 * fi * y2 - w1
    out[7] = 0.5 * (fi * x2 + fr * y2)
    out[8] = 0.5 * u1


@njit(cache=True)
def _cplx_one(f0, D, p, sgn, d, dt, nsteps):
    s = np.zeros(9)
    tmp = np.empty(9)
    k1 = np.empty(9)
    k2 = np.empty(9)
    k3 = np.empty(9)
    k4 = np.empty(9)
    for st in range(nsteps):
        k = 2 * st
        fa = f0[k] + sgn * D[p, k]
        fm = f0[k + 1] + sgn * D[p, k + 1]
        fb = f0[k + 2] + sgn * D[p, k + 2]
        _cplx_rhs(fa.real, fa.imag, d, s, k1)
        for i in range(9):
            tmp[i] = s[i] + 0.5 * dt * k1[i]
        _cplx_rhs(fm.real, fm.imag, d, tmp, k2)
        for i in range(9):
            tmp[i] = s[i] + 0.5 * dt * k2[i]
        _cplx_rhs(fm.real, fm.imag, d, tmp, k3)
        for i in range(9):
            tmp[i] = s[i] + dt * k3[i]
        _cplx_rhs(fb.real, fb.imag, d, tmp, k4)
        for i in range(9):
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    w1 = s[3]
    return s[8] + 0.5 * s[2] + 4.0 * (2.0 * s[7] - w1 * w1)


@njit(parallel=True, cache=True)
def batch_complex(f0, D, h, d, dt, nsteps, n_sys):
    P = D.shape[0]
    out = np.empty(n_sys)
    for j in prange(n_sys):
        if j == 0:
            out[j] = _cplx_one(f0, D, 0, 0.0, d, dt, nsteps)
        elif j <= P:
            out[j] = _cplx_one(f0, D, j - 1, h, d, dt, nsteps)
        else:
            out[j] = _cplx_one(f0, D, j - 1 - P, -h, d, dt, nsteps)
    return out
