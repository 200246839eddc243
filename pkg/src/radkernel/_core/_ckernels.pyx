# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: tridiagonal theta-scheme marching and log-mean quadrature."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, expm1, fabs

cnp.import_array()


def cumulative_powerlaw(const double[::1] f, const double[::1] r, double start=0.0):
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i
    cdef double ga, gb, L, k, seg
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    if n == 0:
        return out_arr
    out[0] = start
    for i in range(n - 1):
        L = log(r[i + 1] / r[i])
        ga = f[i] * r[i]
        gb = f[i + 1] * r[i + 1]
        if ga * gb > 0.0:
            k = log(gb / ga)
            if fabs(k) < 1e-8:
                seg = L * ga * (1.0 + 0.5 * k + k * k / 6.0)
            else:
                seg = L * ga * expm1(k) / k
        else:
            seg = 0.5 * L * (ga + gb)
        out[i + 1] = out[i] + seg
    return out_arr


cdef void _thomas(const double[::1] a, const double[::1] b, const double[::1] c, const double[::1] d,
                  double[::1] cp, double[::1] x) noexcept nogil:
    # a: sub-diagonal (a[0] unused), b: diagonal, c: super-diagonal (c[n-1] unused)
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i
    cdef double m
    cp[0] = c[0] / b[0]
    x[0] = d[0] / b[0]
    for i in range(1, n):
        m = b[i] - a[i] * cp[i - 1]
        if i < n - 1:
            cp[i] = c[i] / m
        x[i] = (d[i] - a[i] * x[i - 1]) / m
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]


def tridiag_solve(const double[::1] a, const double[::1] b, const double[::1] c, const double[::1] d):
    cdef Py_ssize_t n = b.shape[0]
    x = np.empty(n, dtype=np.float64)
    cp = np.empty(n, dtype=np.float64)
    _thomas(a, b, c, d, cp, x)
    return x


def theta_march(const double[::1] mass, const double[::1] lower, const double[::1] diag,
                const double[::1] upper, const double[::1] u0, const double[::1] dts,
                const double[::1] thetas, const cnp.uint8_t[::1] save, double outflow_coeff):
    """March M u' = -K u with a per-step theta scheme.

    ``lower[i]`` couples node i to i-1, ``upper[i]`` couples i to i+1.
    Returns the saved states (one row per flagged step) and the mass that
    left through the outer boundary, ``outflow_coeff * u[-1]`` per unit time.
    """
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t nsteps = dts.shape[0]
    cdef Py_ssize_t i, s, k = 0
    cdef Py_ssize_t nsave = 0
    cdef double dt, th, w, tdt, m, ai, rhs_i, outflow = 0.0, last_old
    for s in range(nsteps):
        if save[s]:
            nsave += 1
    snaps_arr = np.empty((nsave, n), dtype=np.float64)
    cdef double[:, ::1] snaps = snaps_arr
    u_arr = np.array(u0, dtype=np.float64, copy=True)
    cdef double[::1] u = u_arr
    cdef double[::1] cp = np.empty(n)
    cdef double[::1] unew = np.empty(n)
    with nogil:
        for s in range(nsteps):
            dt = dts[s]
            th = thetas[s]
            w = (1.0 - th) * dt
            tdt = th * dt
            # explicit part and forward sweep of the Thomas algorithm in one pass
            last_old = u[n - 1]
            rhs_i = (mass[0] - w * diag[0]) * u[0]
            if n > 1:
                rhs_i -= w * upper[0] * u[1]
            m = 1.0 / (mass[0] + tdt * diag[0])
            cp[0] = tdt * upper[0] * m
            unew[0] = rhs_i * m
            for i in range(1, n):
                rhs_i = (mass[i] - w * diag[i]) * u[i] - w * lower[i] * u[i - 1]
                if i < n - 1:
                    rhs_i -= w * upper[i] * u[i + 1]
                ai = tdt * lower[i]
                m = 1.0 / (mass[i] + tdt * diag[i] - ai * cp[i - 1])
                cp[i] = tdt * upper[i] * m
                unew[i] = (rhs_i - ai * unew[i - 1]) * m
            u[n - 1] = unew[n - 1]
            for i in range(n - 2, -1, -1):
                u[i] = unew[i] - cp[i] * u[i + 1]
            outflow += dt * outflow_coeff * (th * u[n - 1] + (1.0 - th) * last_old)
            if save[s]:
                for i in range(n):
                    snaps[k, i] = u[i]
                k += 1
    return snaps_arr, outflow
