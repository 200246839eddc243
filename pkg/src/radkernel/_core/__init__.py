"""Hot numerical kernels.

The compiled extension ``_ckernels`` is used when it has been built; otherwise
the NumPy fallback in ``_pykernels`` is imported. Set ``RADKERNEL_PURE_PYTHON=1``
to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"

if os.environ.get("RADKERNEL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def cumulative_powerlaw(f, r, start=0.0):
    """Cumulative integral of ``f`` over the increasing grid ``r``.

    Each cell is integrated exactly for a power law through its end values
    (log-mean of ``f*r`` in log r); cells where ``f`` changes sign fall back to
    the trapezoid rule in log r.
    """
    return _impl.cumulative_powerlaw(_c(f), _c(r), float(start))


def tridiag_solve(a, b, c, d):
    return _impl.tridiag_solve(_c(a), _c(b), _c(c), _c(d))


def theta_march(mass, lower, diag, upper, u0, dts, thetas, save, outflow_coeff=0.0):
    """March ``M u' = -K u`` with one theta value per step; see ``_ckernels``."""
    args = [_c(x) for x in (mass, lower, diag, upper, u0, dts, thetas)]
    save = np.ascontiguousarray(save, dtype=np.uint8)
    return _impl.theta_march(*args, save, float(outflow_coeff))


__all__ = ["BACKEND", "cumulative_powerlaw", "tridiag_solve", "theta_march"]
