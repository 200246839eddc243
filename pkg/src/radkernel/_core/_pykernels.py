"""NumPy/SciPy implementations of the compiled kernels (same signatures)."""

import numpy as np
from scipy.linalg import solve_banded


def cumulative_powerlaw(f, r, start=0.0):
    f = np.asarray(f, dtype=float)
    r = np.asarray(r, dtype=float)
    out = np.empty_like(f)
    if f.size == 0:
        return out
    L = np.log(r[1:] / r[:-1])
    ga = f[:-1] * r[:-1]
    gb = f[1:] * r[1:]
    same = ga * gb > 0.0
    seg = 0.5 * L * (ga + gb)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(same, np.log(np.where(same, gb / ga, 1.0)), 0.0)
        small = np.abs(k) < 1e-8
        ratio = np.where(small, 1.0 + 0.5 * k + k * k / 6.0, np.expm1(k) / np.where(small, 1.0, k))
    seg = np.where(same, L * ga * ratio, seg)
    out[0] = start
    out[1:] = start + np.cumsum(seg)
    return out


def tridiag_solve(a, b, c, d):
    n = len(b)
    ab = np.zeros((3, n))
    ab[0, 1:] = c[:-1]
    ab[1] = b
    ab[2, :-1] = a[1:]
    return solve_banded((1, 1), ab, d)


def theta_march(mass, lower, diag, upper, u0, dts, thetas, save, outflow_coeff):
    mass = np.asarray(mass, dtype=float)
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    u = np.array(u0, dtype=float, copy=True)
    n = diag.size
    snaps = []
    outflow = 0.0
    ab = np.zeros((3, n))
    cache_key = None
    for dt, th, keep in zip(dts, thetas, save):
        w = (1.0 - th) * dt
        rhs = (mass - w * diag) * u
        rhs[1:] -= w * lower[1:] * u[:-1]
        rhs[:-1] -= w * upper[:-1] * u[1:]
        key = (dt, th)
        if key != cache_key:
            ab[0, 1:] = th * dt * upper[:-1]
            ab[1] = mass + th * dt * diag
            ab[2, :-1] = th * dt * lower[1:]
            cache_key = key
        last_old = u[-1]
        u = solve_banded((1, 1), ab, rhs, check_finite=False)
        outflow += dt * outflow_coeff * (th * u[-1] + (1.0 - th) * last_old)
        if keep:
            snaps.append(u.copy())
    snaps = np.array(snaps).reshape(len(snaps), n)
    return snaps, outflow
