"""The distinguished positive solution ``U`` of ``U'' + (N-1)/r U' - V U = 0``.

``U`` is pinned down by ``U(r) ~ r**A+(lambda1)`` as ``r -> 0``. Near the
origin it is built by successive approximation of the Volterra equation

    U(r) = u(r) (1 + F(r)),
    F(r) = int_0^r s^(1-N) u(s)^-2 int_0^s t^(N-1) u(t) V_l1(t) U(t) dt ds,

with ``u = r**A+(lambda1)`` and ``V_l1 = V - lambda1/r**2``; it is then carried
outward by an implicit ODE integrator in ``log r``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from ._core import cumulative_powerlaw
from .errors import (ConditioningError, ConvergenceError, DomainError, IntegrationError,
                     NonContractingError, ValidationError)
from .grid import RadialGrid, default_grid, radial_laplacian
from .potential import PotentialSpec, exponents, is_hardy_critical


def _power_closure(f, r):
    """``int_0^r[0] f`` assuming ``f`` continues as the power law through its first two nodes."""
    f0, f1 = f[0], f[1]
    if f0 == 0.0:
        return 0.0
    if f0 * f1 <= 0.0:
        return 0.5 * f0 * r[0]
    p = math.log(f1 / f0) / math.log(r[1] / r[0])
    if p <= -1.0:
        raise DomainError(f"integrand ~ r^{p:.3f} is not integrable at the origin")
    return f0 * r[0] / (p + 1.0)


def _cumulative_from_zero(f, r):
    return cumulative_powerlaw(f, r, _power_closure(f, r))


@dataclass(frozen=True, eq=False)
class PartialProfile:
    """``U`` on ``(0, r_cut]`` together with its Picard diagnostics."""

    r: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    a_plus: float
    correction: np.ndarray = None
    iterations: int = 0
    increments: tuple = ()

    @property
    def r_cut(self) -> float:
        return float(self.r[-1])


def picard_near_zero(spec: PotentialSpec, r_cut: float = 1e-2, tol: float = 1e-13,
                     max_iter: int = 100, grid: RadialGrid | None = None,
                     refine: int = 4) -> PartialProfile:
    """Fixed point of the successive-approximation map on ``(0, r_cut]``.

    Quadrature runs on a ``refine``-times denser copy of ``grid`` and the
    result is sampled back onto the grid nodes.
    """
    grid = default_grid() if grid is None else grid
    base = grid.upto(r_cut)
    fine = base.refine(refine) if refine > 1 else base
    r = fine.nodes
    n_dim = spec.dimension
    a = exponents(n_dim, spec.lambda1).a_plus
    u = r**a
    # t^(N-1) u(t) V_l1(t), without the factor U_n
    kernel_in = r ** (n_dim - 3) * u * spec.r2_residual(r, spec.lambda1)
    weight_out = r ** (1 - n_dim) / (u * u)

    corr = np.zeros_like(r)
    increments = []
    for it in range(1, max_iter + 1):
        inner = _cumulative_from_zero(kernel_in * u * (1.0 + corr), r)
        outer_integrand = weight_out * inner
        new = _cumulative_from_zero(outer_integrand, r)
        inc = float(np.max(np.abs(new - corr)))
        increments.append(inc)
        corr = new
        if np.max(np.abs(corr)) > 1.0:
            raise NonContractingError(
                f"r_cut too large: |U/u - 1| reached {np.max(np.abs(corr)):.3g} on (0, {r_cut:g}]")
        if inc < tol or inc < 1e-15 * (1.0 + np.max(np.abs(corr))):
            break
        if it >= 3 and inc > 0.5 * increments[-2]:
            raise NonContractingError(
                f"r_cut too large: Picard increments not contracting ({increments[-2]:.3e} -> {inc:.3e})")
    else:
        raise ConvergenceError(f"Picard iteration did not converge in {max_iter} steps; "
                               f"last increment {increments[-1]:.3e}")

    dcorr = outer_integrand  # F'(r)
    values = u * (1.0 + corr)
    deriv = a * r ** (a - 1.0) * (1.0 + corr) + u * dcorr
    sl = slice(None, None, refine) if refine > 1 else slice(None)
    return PartialProfile(base.nodes.copy(), values[sl].copy(), deriv[sl].copy(), a,
                          corr[sl].copy(), len(increments), tuple(increments))


@dataclass(frozen=True)
class TailFit:
    """``U ~ c1 * b_plus + c2 * b_minus`` on a window near ``r_max``."""

    c1: float
    c2: float
    residual: float
    window: tuple
    log_branch: bool
    p_plus: float
    p_minus: float

    def basis(self, r):
        r = np.asarray(r, dtype=float)
        if self.log_branch:
            return r**self.p_minus * np.log(r), r**self.p_minus
        return r**self.p_plus, r**self.p_minus

    def branch_magnitudes(self, r=None):
        r = self.window[1] if r is None else r
        bp, bm = self.basis(r)
        return abs(self.c1) * float(bp), abs(self.c2) * float(bm)

    def to_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "residual": self.residual,
                "window": list(self.window), "log_branch": self.log_branch,
                "p_plus": self.p_plus, "p_minus": self.p_minus}


@dataclass(frozen=True, eq=False)
class HarmonicProfile:
    grid: RadialGrid
    values: np.ndarray
    derivative: np.ndarray
    dimension: int
    lambda1: float
    lambda2: float
    near_zero_exponent: float
    correction_exponent: float | None = None
    tail: TailFit | None = None
    closure_exponent: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("values", "derivative"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.closure_exponent is None:
            object.__setattr__(self, "closure_exponent",
                               exponents(self.dimension, self.lambda1).a_plus)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @cached_property
    def positive(self) -> bool:
        return bool(np.all(self.values > 0))

    @cached_property
    def _spline(self):
        t = np.log(self.r)
        if self.positive:
            return CubicHermiteSpline(t, np.log(self.values), self.r * self.derivative / self.values)
        return CubicHermiteSpline(t, self.values, self.r * self.derivative)

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr <= 0):
            raise DomainError("profile is defined for r > 0")
        if np.any(r_arr > self.r[-1] * (1 + 1e-12)):
            raise DomainError(f"r beyond the profile grid (r_max={self.r[-1]:g})")
        t = np.log(np.clip(r_arr, self.r[0], self.r[-1]))
        s = self._spline(t)
        out = np.exp(s) if self.positive else s
        below = r_arr < self.r[0]
        if np.any(below):
            out = np.where(below, self.values[0] * (r_arr / self.r[0]) ** self.closure_exponent, out)
        return float(out) if np.ndim(r) == 0 else out

    def derivative_at(self, r):
        r_arr = np.asarray(r, dtype=float)
        t = np.log(np.clip(r_arr, self.r[0], self.r[-1]))
        ds = self._spline(t, 1)
        if self.positive:
            out = np.exp(self._spline(t)) * ds / r_arr
        else:
            out = ds / r_arr
        below = r_arr < self.r[0]
        if np.any(below):
            a = self.closure_exponent
            out = np.where(below, self.values[0] * a * r_arr ** (a - 1) / self.r[0] ** a, out)
        return float(out) if np.ndim(r) == 0 else out

    def with_tail(self, tail: TailFit | None) -> "HarmonicProfile":
        return HarmonicProfile(self.grid, self.values, self.derivative, self.dimension,
                               self.lambda1, self.lambda2, self.near_zero_exponent,
                               self.correction_exponent, tail, self.closure_exponent, dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "near_zero_exponent": self.near_zero_exponent,
            "expected_near_zero_exponent": exponents(self.dimension, self.lambda1).a_plus,
            "correction_exponent": self.correction_exponent,
            "closure_exponent": self.closure_exponent,
            "tail": None if self.tail is None else self.tail.to_dict(),
            "grid": self.grid.to_dict(),
            "positive": self.positive,
            **self.meta,
        }

    def write_csv(self, path):
        from .io import write_csv

        write_csv(path, ["r", "U", "dU"], [self.r, self.values, self.derivative])

    @classmethod
    def from_function(cls, grid: RadialGrid, func, dfunc, dimension: int,
                      lambda1: float = 0.0, lambda2: float = 0.0, closure_exponent=None):
        """Wrap sampled values of an arbitrary function (for tests and oracles)."""
        r = grid.nodes
        vals = np.asarray(func(r), dtype=float)
        ders = np.asarray(dfunc(r), dtype=float)
        slope = float(r[0] * ders[0] / vals[0]) if vals[0] != 0 else float("nan")
        if closure_exponent is None:
            closure_exponent = slope
        return cls(grid, vals, ders, dimension, lambda1, lambda2, slope, None, None, closure_exponent)


def power_profile(grid: RadialGrid, a: float, dimension: int) -> HarmonicProfile:
    """``U = r**a`` sampled on ``grid``."""
    return HarmonicProfile.from_function(grid, lambda r: r**a, lambda r: a * r ** (a - 1.0),
                                         dimension, closure_exponent=a)


def _fit_correction_exponent(r, corr):
    mask = np.abs(corr) > 1e-12
    if np.count_nonzero(mask) < 3:
        return None
    slope = np.polyfit(np.log(r[mask]), np.log(np.abs(corr[mask])), 1)[0]
    return float(slope)


def extend_outward(partial: PartialProfile, spec: PotentialSpec, r_max: float | None = None,
                   grid: RadialGrid | None = None, rtol: float = 1e-11,
                   method: str = "Radau") -> HarmonicProfile:
    """Continue the near-zero solution to ``r_max`` by integrating the ODE in ``log r``.

    The unknown is ``y = U r**-a`` (``a`` the near-zero exponent), which obeys
    ``y'' + (2a+N-2) y' - (r^2 V - a^2 - (N-2) a) y = 0`` in ``t = log r``.
    """
    grid = default_grid() if grid is None else grid
    if r_max is not None:
        grid = grid.upto(r_max)
    k = partial.r.size
    if k > grid.nodes.size or not np.allclose(grid.nodes[:k], partial.r, rtol=1e-12):
        raise ValidationError("partial profile nodes must be the leading nodes of the grid")
    n_dim = spec.dimension
    a = partial.a_plus
    damp = 2.0 * a + n_dim - 2.0
    shift = spec.lambda1 - (a * a + (n_dim - 2.0) * a)

    def coef(r):
        return float(spec.r2_residual(r, spec.lambda1)) + shift

    def rhs(t, Y):
        c = coef(math.exp(t))
        return [Y[1], -damp * Y[1] + c * Y[0]]

    def jac(t, Y):
        return [[0.0, 1.0], [coef(math.exp(t)), -damp]]

    r_c = partial.r[-1]
    y0 = partial.values[-1] * r_c ** (-a)
    z0 = r_c ** (1.0 - a) * (partial.derivative[-1] - a * partial.values[-1] / r_c)
    out_r = grid.nodes[k:]
    ys = np.empty(out_r.size)
    zs = np.empty(out_r.size)
    if out_r.size:
        t_nodes = np.log(out_r)
        cuts = [math.log(r_c)] + [math.log(b) for b in spec.breakpoints if r_c < b < out_r[-1]]
        cuts.append(t_nodes[-1])
        state = np.array([y0, z0])
        scale = max(abs(y0), abs(z0), 1e-300)
        filled = 0
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            if t1 - t0 <= 0:
                continue
            sel = (t_nodes > t0) & (t_nodes <= t1)
            m = int(np.count_nonzero(sel))
            # always end the output at t1 so the next segment restarts there
            t_eval = np.append(t_nodes[sel], t1) if (m == 0 or t_nodes[sel][-1] < t1) else t_nodes[sel]
            sol = solve_ivp(rhs, (t0, t1), state, method=method, t_eval=t_eval, jac=jac,
                            rtol=rtol, atol=rtol * 1e-12 * scale, dense_output=False)
            if not sol.success:
                raise IntegrationError(f"ODE integration failed near r={math.exp(sol.t[-1]):.4g}: "
                                       f"{sol.message}", radius=math.exp(sol.t[-1]))
            ys[filled:filled + m] = sol.y[0, :m]
            zs[filled:filled + m] = sol.y[1, :m]
            filled += m
            state = sol.y[:, -1]
            if not np.all(np.isfinite(state)):
                break
            scale = max(scale, float(np.max(np.abs(state))))
    U_out = out_r**a * ys
    dU_out = out_r ** (a - 1.0) * (zs + a * ys)
    bad = ~np.isfinite(U_out) | (np.abs(U_out) > 1e300)
    if np.any(bad):
        r_bad = float(out_r[np.argmax(bad)])
        raise IntegrationError(f"solution overflows before r_max (blow-up near r={r_bad:.4g})", radius=r_bad)
    values = np.concatenate([partial.values, U_out])
    deriv = np.concatenate([partial.derivative, dU_out])
    r0 = grid.nodes[0]
    near = float(r0 * deriv[0] / values[0])
    corr_exp = None
    if partial.correction is not None:
        corr_exp = _fit_correction_exponent(partial.r, partial.correction)
    meta = {"r_cut": float(r_c), "picard_iterations": partial.iterations}
    return HarmonicProfile(grid, values, deriv, n_dim, spec.lambda1, spec.lambda2, near,
                           corr_exp, None, a, meta)


def kelvin(profile: HarmonicProfile) -> HarmonicProfile:
    """``w_hat(s) = s**(2-N) w(1/s)`` on the reflected grid."""
    n_dim = profile.dimension
    s = 1.0 / profile.r[::-1]
    w = profile.values[::-1]
    dw = profile.derivative[::-1]
    vals = s ** (2.0 - n_dim) * w
    ders = (2.0 - n_dim) * s ** (1.0 - n_dim) * w - s ** (-n_dim) * dw
    grid = RadialGrid.from_nodes(s, profile.grid.points_per_decade)
    near = float(s[0] * ders[0] / vals[0]) if vals[0] != 0 else float("nan")
    return HarmonicProfile(grid, vals, ders, n_dim, profile.lambda2, profile.lambda1, near,
                           None, None, near, {"kelvin": True})


def fit_tail(profile: HarmonicProfile, spec: PotentialSpec | None = None, window=None,
             cond_max: float = 1e8) -> TailFit:
    """Least-squares fit of ``U`` against the two asymptotic branches at infinity."""
    n_dim = profile.dimension
    lam2 = profile.lambda2 if spec is None else spec.lambda2
    r_hi = profile.r[-1]
    lo, hi = (r_hi / 100.0, r_hi) if window is None else window
    sel = (profile.r >= lo * (1 - 1e-12)) & (profile.r <= hi * (1 + 1e-12))
    r = profile.r[sel]
    U = profile.values[sel]
    if r.size < 4:
        raise ValidationError("tail window holds fewer than 4 grid nodes")
    ex = exponents(n_dim, lam2)
    log_branch = is_hardy_critical(n_dim, lam2)
    if log_branch:
        p = -(n_dim - 2) / 2.0
        bp, bm = r**p * np.log(r), r**p
    else:
        bp, bm = r**ex.a_plus, r**ex.a_minus
    w = 1.0 / (np.abs(bp) + np.abs(bm))
    A = np.column_stack([bp * w, bm * w])
    norms = np.linalg.norm(A, axis=0)
    cond = np.linalg.cond(A / norms)
    if not np.isfinite(cond) or cond > cond_max:
        raise ConditioningError(f"tail basis ill-conditioned on [{lo:g}, {hi:g}] (cond {cond:.2e}); "
                                "widen the window or enlarge r_max")
    coef, *_ = np.linalg.lstsq(A / norms, U * w, rcond=None)
    c1, c2 = coef / norms
    fit = c1 * bp + c2 * bm
    if np.all(U != 0) and np.all(np.sign(U) == np.sign(U[0])):
        resid = float(np.max(np.abs(fit - U) / np.abs(U)))
    else:
        resid = float(np.max(np.abs(fit - U) * w) / np.max(np.abs(U) * w))
    return TailFit(float(c1), float(c2), resid, (float(r[0]), float(r[-1])), bool(log_branch),
                   float(ex.a_plus), float(ex.a_minus))


@dataclass(frozen=True, eq=False)
class FProfile:
    grid: RadialGrid
    values: np.ndarray
    derivative: np.ndarray


def f_of_u(profile: HarmonicProfile) -> FProfile:
    """``F[U](r) = U(r) int_0^r s^(1-N) U(s)^-2 int_0^s t^(N-1) U(t)^2 dt ds``.

    Below the first node ``U`` is continued as ``U(r_min) (r/r_min)**a`` with
    ``a`` the profile's closure exponent, which closes both integrals exactly.
    """
    U = profile.values
    if np.any(U <= 0):
        raise DomainError("F[U] needs a strictly positive profile")
    r = profile.r
    n_dim = profile.dimension
    a = profile.closure_exponent
    if n_dim + 2 * a <= 0:
        raise DomainError("U^2 r^(N-1) is not integrable at the origin")
    r0 = r[0]
    inner = cumulative_powerlaw(r ** (n_dim - 1) * U * U, r, U[0] ** 2 * r0**n_dim / (n_dim + 2 * a))
    h = r ** (1 - n_dim) / (U * U) * inner
    outer = cumulative_powerlaw(h, r, r0 * r0 / (2.0 * (n_dim + 2 * a)))
    F = U * outer
    dF = profile.derivative * outer + U * h
    return FProfile(profile.grid, F, dF)


@dataclass(frozen=True)
class ZeroCrossing:
    radius: float
    interval: tuple


def positivity_scan(profile: HarmonicProfile) -> ZeroCrossing | None:
    """First sign change of ``U`` on the grid, refined by bracketing root search."""
    U = profile.values
    sign = np.sign(U)
    if sign[0] == 0:
        return ZeroCrossing(float(profile.r[0]), (float(profile.r[0]), float(profile.r[0])))
    change = np.nonzero(sign[1:] != sign[0])[0]
    if change.size == 0:
        return None
    i = int(change[0])
    lo, hi = float(profile.r[i]), float(profile.r[i + 1])
    if U[i + 1] == 0:
        return ZeroCrossing(hi, (lo, hi))
    spline = CubicHermiteSpline(np.log(profile.r[i:i + 2]), U[i:i + 2],
                                profile.r[i:i + 2] * profile.derivative[i:i + 2])
    t = brentq(lambda x: float(spline(x)), math.log(lo), math.log(hi), xtol=1e-14)
    return ZeroCrossing(math.exp(t), (lo, hi))


def solve_harmonic(spec: PotentialSpec, grid: RadialGrid | None = None, r_cut: float = 1e-2,
                   tol: float = 1e-13, max_iter: int = 100, rtol: float = 1e-11,
                   fit_window=None, method: str = "Radau") -> HarmonicProfile:
    """Full pipeline: Picard near zero, outward continuation, tail fit.

    ``r_cut`` is reduced tenfold (up to three times) if the iteration fails to
    contract.
    """
    grid = default_grid() if grid is None else grid
    cut = min(r_cut, grid.r_max)
    for attempt in range(4):
        try:
            part = picard_near_zero(spec, cut, tol, max_iter, grid)
            break
        except NonContractingError:
            if attempt == 3 or cut / 10 < grid.nodes[2]:
                raise
            cut /= 10.0
    prof = extend_outward(part, spec, grid=grid, rtol=rtol, method=method)
    try:
        tail = fit_tail(prof, spec, fit_window)
    except (ConditioningError, ValidationError) as exc:
        warnings.warn(f"tail fit unavailable: {exc}")
        tail = None
    return prof.with_tail(tail)


def ode_residual(profile: HarmonicProfile, spec: PotentialSpec) -> np.ndarray:
    """Centered-difference residual of the ODE, relative to ``|U|``, at interior nodes."""
    r = profile.r
    lap = radial_laplacian(profile.values, r, profile.dimension)
    V = spec.r2v(r[1:-1]) / r[1:-1] ** 2
    return (lap - V * profile.values[1:-1]) * r[1:-1] ** 2 / np.abs(profile.values[1:-1])


def profile_json(profile: HarmonicProfile) -> str:
    return json.dumps(profile.to_dict(), indent=2, sort_keys=True)
