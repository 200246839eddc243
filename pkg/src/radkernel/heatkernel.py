"""Heat kernel of ``d_t u = Delta u - V(|x|) u`` by spherical-harmonic modes.

Mode ``l`` is the kernel of the radial operator with potential
``V + l(l+N-2)/r**2`` on ``L^2(r^(N-1) dr)``; the full kernel is

    p(x, y, t) = sum_l p_l(|x|, |y|, t) Z_l(cos theta)

with ``Z_l`` the zonal harmonic of degree ``l`` on ``S^(N-1)``, so that
``int p_0(r, rho, t) rho^(N-1) d rho = 1`` for the free kernel.

The mode solver writes ``p_l = (r rho)^a v`` with ``a = A+(lambda1 + l(l+N-2))``.
Then ``v`` is the kernel of ``v'' + (N'-1)/r v' - R v`` with ``N' = N + 2a``
and ``R = V - lambda1/r**2``, which is regular at the origin, so the
near-zero branch is selected by the change of variables itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import eval_gegenbauer, ive

from ._core import theta_march
from .errors import DomainError, TruncationError, ValidationError
from .grid import RadialGrid
from .harmonic import HarmonicProfile
from .potential import PotentialSpec, exponents, hardy_constant
from .weights import sphere_area

TRUNCATION_WARN = 1e-4
RICHARDSON_MODES = ("grid", "width", "none")


# ---------------------------------------------------------------- oracles

def zonal(dimension: int, l: int, x):
    """Zonal harmonic ``Z_l(x)`` on ``S^(N-1)``, reproducing kernel of degree-``l`` harmonics."""
    x = np.asarray(x, dtype=float)
    area = sphere_area(dimension)
    if dimension == 2:
        if l == 0:
            return np.full_like(x, 1.0 / area)
        return np.cos(l * np.arccos(np.clip(x, -1.0, 1.0))) * (2.0 / area)
    alpha = 0.5 * (dimension - 2)
    return (l + alpha) / alpha * eval_gegenbauer(l, alpha, x) / area


def free_kernel(dimension: int, x, y, cos_theta, t):
    d2 = distance_sq(x, y, cos_theta)
    return (4.0 * np.pi * t) ** (-dimension / 2) * np.exp(-d2 / (4.0 * t))


def distance_sq(x, y, cos_theta):
    x, y, c = (np.asarray(v, dtype=float) for v in (x, y, cos_theta))
    return np.maximum((x - y) ** 2 + 2.0 * x * y * (1.0 - c), 0.0)


def bessel_order(dimension: int, lam: float, l: int):
    val = 0.25 * (dimension - 2) ** 2 + lam + l * (l + dimension - 2.0)
    return np.sqrt(np.maximum(val, 0.0))


def oracle_mode(dimension: int, lam: float, l, r, rho, t):
    """``p_l`` for ``V = lam/r**2``: ``(r rho)^-alpha (2t)^-1 exp(-(r-rho)^2/4t) ive(nu_l, r rho/2t)``."""
    if lam < hardy_constant(dimension) - 1e-12:
        raise DomainError("supercritical inverse-square coefficient")
    r, rho, t = (np.asarray(v, dtype=float) for v in (r, rho, t))
    alpha = 0.5 * (dimension - 2)
    nu = bessel_order(dimension, lam, l)
    z = r * rho / (2.0 * t)
    return (r * rho) ** (-alpha) / (2.0 * t) * np.exp(-((r - rho) ** 2) / (4.0 * t)) * ive(nu, z)


@dataclass(frozen=True)
class SeriesValue:
    value: float
    l_max: int
    indicator: float
    cancellation: float = 0.0


def oracle_series(dimension: int, lam: float, x: float, y: float, cos_theta: float, t: float,
                  l_max: int | None = None) -> SeriesValue:
    """Bessel mode series for the pure inverse-square kernel.

    Without ``l_max`` the series is cut at ``12 sqrt(z) + 40`` terms,
    ``z = |x||y|/2t``, where ``I_nu(z)/I_0(z) ~ exp(-nu^2/2z)`` is far below
    double precision. The indicator is the last term bound (the term at
    ``cos theta = 1``) relative to the sum of bounds. ``cancellation`` is the
    rounding error of the sum relative to its value, large far off-diagonal.
    """
    z = x * y / (2.0 * t)
    if l_max is None:
        l_max = int(12.0 * math.sqrt(z) + 40)
    ls = np.arange(l_max + 1)
    modes = oracle_mode(dimension, lam, ls, x, y, t)
    terms = modes * zonal_vector(dimension, ls, cos_theta)
    bound = modes * zonal_vector(dimension, ls, 1.0)
    total = float(np.sum(terms))
    ref = float(np.sum(bound))
    ind = float(np.abs(bound[-1]) / ref) if ref > 0 else 0.0
    cancel = float(np.finfo(float).eps * np.sum(np.abs(terms)) / abs(total)) if total else math.inf
    return SeriesValue(total, int(l_max), ind, cancel)


def zonal_vector(dimension: int, ls, x):
    return np.array([float(zonal(dimension, int(l), x)) for l in ls])


def oracle_kernel(dimension: int, lam: float, x, y, cos_theta, t, l_max: int | None = None):
    """Exact kernel of ``-Delta + lam/|x|^2`` at the given points (vectorized over samples)."""
    x, y, c, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, cos_theta, t)))
    out = np.empty(x.shape)
    for idx in np.ndindex(x.shape):
        out[idx] = oracle_series(dimension, lam, x[idx], y[idx], c[idx], t[idx], l_max).value
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- mode solver

@dataclass(frozen=True)
class SolverConfig:
    points_per_decade: int = 1000
    r_min: float = 1e-3
    r_max: float | None = None
    time_ratio: float = 0.02
    l_max: int = 24
    source_width: float = 1.0
    richardson: str = "grid"
    rannacher_steps: int = 2
    boundary: str = "DirichletAtRmax"
    outflow_tol: float = 1e-6
    grid: RadialGrid | None = None

    def __post_init__(self):
        if self.l_max < 0:
            raise ValidationError("l_max must be >= 0")
        if self.boundary != "DirichletAtRmax":
            raise ValidationError(f"unsupported boundary {self.boundary!r}")
        if not 0 < self.time_ratio < 1:
            raise ValidationError("time_ratio must lie in (0, 1)")
        if self.richardson not in RICHARDSON_MODES:
            raise ValidationError(f"richardson must be one of {RICHARDSON_MODES}")

    def make_grid(self, t_max: float, rho_max: float, n_eff: float = 2.0) -> RadialGrid:
        """Default ``r_max`` covers the outward drift of the ``N'``-dimensional radial process."""
        if self.grid is not None:
            if self.grid.r_max < 8.0 * math.sqrt(t_max):
                raise ValidationError(f"r_max={self.grid.r_max:g} violates r_max >= 8 sqrt(t_max)")
            return self.grid
        r_max = self.r_max if self.r_max is not None else (math.sqrt(rho_max**2 + 2.0 * n_eff * t_max)
                                                       + 10.0 * math.sqrt(t_max))
        if r_max < 8.0 * math.sqrt(t_max):
            raise ValidationError(f"r_max={r_max:g} violates r_max >= 8 sqrt(t_max)")
        return RadialGrid(self.r_min, r_max, self.points_per_decade)

    def refined(self, factor: int = 2) -> "SolverConfig":
        return replace(self, points_per_decade=self.points_per_decade * factor,
                       time_ratio=self.time_ratio / factor, grid=None)

    def to_dict(self) -> dict:
        return {"points_per_decade": self.points_per_decade, "r_min": self.r_min,
                "r_max": self.r_max, "time_ratio": self.time_ratio, "l_max": self.l_max,
                "source_width": self.source_width, "richardson": self.richardson,
                "boundary": self.boundary}


def mode_exponent(spec: PotentialSpec, l: int) -> float:
    return exponents(spec.dimension, spec.lambda1 + l * (l + spec.dimension - 2)).a_plus


def time_steps(t_start: float, targets, ratio: float, rannacher: int = 2):
    """Graded steps ``dt = ratio * t`` landing exactly on every target time.

    Returns ``(dts, thetas, save)``; the first ``rannacher`` steps are split into
    two implicit-Euler half steps to damp the rough start.
    """
    targets = np.unique(np.asarray(targets, dtype=float))
    if targets[0] <= t_start:
        raise ValidationError(f"first output time {targets[0]:g} precedes the start time {t_start:.3g}")
    dts, save = [], []
    t = t_start
    for target in targets:
        while t < target * (1 - 1e-14):
            dt = ratio * t
            if t + 1.5 * dt >= target:
                dt = target - t if t + dt >= target else 0.5 * (target - t)
            dts.append(dt)
            t += dt
            save.append(False)
        t = target
        save[-1] = True
    dts = np.array(dts)
    save = np.array(save)
    thetas = np.full(dts.size, 0.5)
    k = min(rannacher, dts.size)
    if k:
        head = np.repeat(dts[:k] / 2.0, 2)
        head_save = np.zeros(2 * k, dtype=bool)
        head_save[1::2] = save[:k]
        dts = np.concatenate([head, dts[k:]])
        save = np.concatenate([head_save, save[k:]])
        thetas = np.concatenate([np.ones(2 * k), thetas[k:]])
    return dts, thetas, save.astype(np.uint8)


@dataclass(frozen=True)
class _Operator:
    r: np.ndarray
    mass: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    outflow_coeff: float


def _operator(nodes: np.ndarray, r_max_face: float, n_eff: float, rho: float, resid) -> _Operator:
    """Finite volumes for ``r^(1-N') (r^(N'-1) v')' - R v``, weights scaled by ``rho^(1-N')``.

    Nodes whose weight would underflow are dropped; the inner face then acts
    as a zero-flux wall, which is what the regular branch gives anyway.
    """
    logf = (n_eff - 1.0) * np.log(nodes / rho)
    keep = logf > -600.0
    r = nodes[keep]
    n = r.size
    faces = np.empty(n + 1)
    faces[0] = 0.0 if keep[0] else math.sqrt(r[0] * nodes[np.argmax(keep) - 1])
    faces[1:-1] = np.sqrt(r[:-1] * r[1:])
    faces[-1] = r_max_face
    f = faces / rho
    mass = rho * (f[1:] ** n_eff - f[:-1] ** n_eff) / n_eff
    # conductances between node i and i+1; the last one couples to the Dirichlet wall
    right = np.append(r[1:], r_max_face)
    k = f[1:] ** (n_eff - 1.0) / (right - r)
    pot = mass * resid(r)
    diag = k + pot
    diag[1:] += k[:-1]
    lower = np.zeros(n)
    lower[1:] = -k[:-1]
    upper = np.zeros(n)
    upper[:-1] = -k[:-1]
    return _Operator(r, mass, lower, diag, upper, float(k[-1]))


def _lagrange4(x_nodes, y_nodes, x):
    """Four-point Lagrange interpolation (in the coordinates given)."""
    i = np.clip(np.searchsorted(x_nodes, x) - 2, 0, x_nodes.size - 4)
    idx = i[..., None] + np.arange(4)
    xs = x_nodes[idx]
    ys = y_nodes[..., idx] if y_nodes.ndim == 1 else np.take_along_axis(y_nodes, idx, axis=-1)
    out = np.zeros(np.broadcast(x, ys[..., 0]).shape)
    for j in range(4):
        w = np.ones_like(x, dtype=float)
        for m in range(4):
            if m != j:
                w = w * (x - xs[..., m]) / (xs[..., j] - xs[..., m])
        out = out + w * ys[..., j]
    return out


@dataclass(frozen=True, eq=False)
class ModeKernel:
    """``p_l(r, rho, t)`` for one source radius ``rho`` at the saved times."""

    l: int
    dimension: int
    source_radius: float
    times: np.ndarray
    r: np.ndarray
    v: np.ndarray  # scaled regular part, one row per time
    exponent: float
    outflow: float
    meta: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        """``p_l`` on the solver nodes, one row per time."""
        rho = self.source_radius
        return (self.r / rho) ** self.exponent * rho ** (1 - self.dimension) * self.v

    def time_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12 * t:
            raise DomainError(f"time {t:g} was not requested from the mode solver")
        return k

    def at(self, r, t: float):
        """Interpolated ``p_l(r, rho, t)``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r[1]) or np.any(r > self.r[-2]):
            raise DomainError("evaluation radius outside the solver grid")
        k = self.time_index(t)
        v = _lagrange4(np.log(self.r), self.v[k], np.log(r))
        rho = self.source_radius
        out = (r / rho) ** self.exponent * rho ** (1 - self.dimension) * v
        return float(out) if out.ndim == 0 else out


def _march(spec, l, rho, times, cfg, grid, width_factor):
    n_eff = spec.dimension + 2.0 * mode_exponent(spec, l)
    lam1 = spec.lambda1

    def resid(r):
        return spec.r2_residual(r, lam1) / r**2

    op = _operator(grid.nodes[:-1], grid.r_max, n_eff, rho, resid)
    h = rho * (grid.ratio - 1.0)
    sigma = cfg.source_width * width_factor * h
    t_start = 0.5 * sigma * sigma
    u0 = np.exp(-0.5 * ((op.r - rho) / sigma) ** 2)
    u0 /= np.dot(op.mass, u0)
    dts, thetas, save = time_steps(t_start, times, cfg.time_ratio, cfg.rannacher_steps)
    snaps, outflow = theta_march(op.mass, op.lower, op.diag, op.upper, u0, dts, thetas, save,
                                 op.outflow_coeff)
    return op.r, snaps, outflow, n_eff


def solve_mode(spec: PotentialSpec, l: int, source_radius: float, times, cfg: SolverConfig | None = None,
               grid: RadialGrid | None = None) -> ModeKernel:
    """Evolve a narrow bump at ``source_radius`` under the mode-``l`` radial operator.

    Every second-order error term (space, time, bump width) scales with the
    grid spacing, so ``richardson="grid"`` combines a run with one twice as
    fine in space and time as ``(4 p_fine - p) / 3``. ``"width"`` combines
    bump widths ``w`` and ``2w`` on one grid instead.
    """
    cfg = SolverConfig() if cfg is None else cfg
    times = np.unique(np.asarray(times, dtype=float))
    rho = float(source_radius)
    if l < 0:
        raise DomainError("mode index must be >= 0")
    a = mode_exponent(spec, l)
    if a <= -spec.dimension / 2:
        raise DomainError("mode kernel is not locally integrable (A+ <= -N/2)")
    if grid is None:
        grid = cfg.make_grid(float(times[-1]), rho, spec.dimension + 2.0 * a)
    if not grid.nodes[2] < rho < grid.nodes[-3]:
        raise DomainError(f"source radius {rho:g} outside the solver grid")
    r, v, outflow, n_eff = _march(spec, l, rho, times, cfg, grid, 1.0)
    if cfg.richardson == "width":
        _, v2, out2, _ = _march(spec, l, rho, times, cfg, grid, 2.0)
        v = (4.0 * v - v2) / 3.0
        outflow = max(outflow, out2)
    elif cfg.richardson == "grid":
        fine_cfg = replace(cfg, time_ratio=0.5 * cfg.time_ratio)
        r_f, v_f, out_f, _ = _march(spec, l, rho, times, fine_cfg, grid.refine(2), 1.0)
        # every coarse node is a fine node
        idx = np.searchsorted(r_f, r)
        v = (4.0 * v_f[:, idx] - v) / 3.0
        outflow = max(outflow, out_f)
    if outflow > cfg.outflow_tol:
        raise TruncationError(f"mass {outflow:.2e} left through r_max={grid.r_max:g} before "
                              f"t={times[-1]:g}; enlarge r_max")
    meta = {"grid": grid.to_dict(), "effective_dimension": n_eff, "time_ratio": cfg.time_ratio,
            "source_width": cfg.source_width, "richardson": cfg.richardson}
    return ModeKernel(l, spec.dimension, rho, times, r, v, a, float(outflow), meta)


def mode_undershoot(mode: ModeKernel) -> float:
    """Most negative value relative to the maximum (0 if nonnegative)."""
    vals = mode.values
    return float(min(0.0, vals.min() / np.abs(vals).max()))


# ---------------------------------------------------------------- assembly

@dataclass(frozen=True, eq=False)
class KernelSlice:
    """Samples ``(|x|, |y|, cos theta, t, p)`` with per-sample truncation indicators."""

    x: np.ndarray
    y: np.ndarray
    cos_theta: np.ndarray
    t: np.ndarray
    p: np.ndarray
    indicator: np.ndarray
    dimension: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.p.size

    @property
    def distance_sq(self):
        return distance_sq(self.x, self.y, self.cos_theta)

    def subset(self, mask) -> "KernelSlice":
        return KernelSlice(self.x[mask], self.y[mask], self.cos_theta[mask], self.t[mask],
                           self.p[mask], self.indicator[mask], self.dimension, dict(self.meta))

    def write_csv(self, path):
        from .io import write_csv

        write_csv(path, ["x", "y", "cos_theta", "t", "p"],
                  [self.x, self.y, self.cos_theta, self.t, self.p])

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "samples": int(self.p.size),
                "max_truncation_indicator": float(np.max(self.indicator)) if self.p.size else 0.0,
                **self.meta}


def assemble(modes, x: float, cos_theta: float, t: float):
    """``sum_l p_l(x, rho, t) Z_l(cos theta)`` and the last-term relative magnitude."""
    modes = sorted(modes, key=lambda m: m.l)
    if [m.l for m in modes] != list(range(len(modes))):
        raise ValidationError("assemble needs modes 0..l_max without gaps")
    n_dim = modes[0].dimension
    terms = np.array([m.at(x, t) * float(zonal(n_dim, m.l, cos_theta)) for m in modes])
    bound = np.array([abs(m.at(x, t)) * float(zonal(n_dim, m.l, 1.0)) for m in modes])
    total = float(terms.sum())
    ind = float(bound[-1] / bound.sum()) if bound.sum() > 0 else 0.0
    return total, ind


def _slice_arrays(x, y, cos_theta, t):
    arrs = np.broadcast_arrays(*(np.asarray(v, dtype=float).ravel() for v in (x, y, cos_theta, t)))
    return [np.ascontiguousarray(a) for a in arrs]


def compute_slice(spec: PotentialSpec, x, y, cos_theta, t, cfg: SolverConfig | None = None,
                  l_max: int | None = None, mode_tol: float = 1e-12) -> KernelSlice:
    """Kernel samples from the mode solver.

    The source is always placed at ``min(|x|, |y|)``, so ``p(x,y,t) = p(y,x,t)``
    holds exactly. Modes are added up to ``l_max`` or until two consecutive
    terms are below ``mode_tol`` of the running sum at every sample.
    """
    cfg = SolverConfig() if cfg is None else cfg
    l_max = cfg.l_max if l_max is None else l_max
    x, y, c, t = _slice_arrays(x, y, cos_theta, t)
    src = np.minimum(x, y)
    obs = np.maximum(x, y)
    p = np.empty(x.size)
    ind = np.empty(x.size)
    used = 0
    for rho in np.unique(src):
        sel = np.nonzero(src == rho)[0]
        times = np.unique(t[sel])
        modes, quiet = [], 0
        for l in range(l_max + 1):
            modes.append(solve_mode(spec, l, rho, times, cfg))
            m = modes[-1]
            bound = np.array([abs(m.at(obs[i], t[i])) * float(zonal(spec.dimension, l, 1.0)) for i in sel])
            total = np.array([abs(modes[0].at(obs[i], t[i])) for i in sel]) * float(zonal(spec.dimension, 0, 1.0))
            quiet = quiet + 1 if np.all(bound <= mode_tol * total) else 0
            if quiet >= 2:
                break
        used = max(used, len(modes) - 1)
        for i in sel:
            p[i], ind[i] = assemble(modes, obs[i], c[i], t[i])
    if np.any(ind > TRUNCATION_WARN):
        warnings.warn(f"mode series truncation indicator {ind.max():.1e} exceeds "
                      f"{TRUNCATION_WARN:.0e}; increase l_max")
    meta = {"source": "mode_solver", "l_max": int(used), "solver": cfg.to_dict()}
    return KernelSlice(x, y, c, t, p, ind, spec.dimension, meta)


def oracle_slice(dimension: int, lam: float, x, y, cos_theta, t, l_max: int | None = None) -> KernelSlice:
    x, y, c, t = _slice_arrays(x, y, cos_theta, t)
    vals = [oracle_series(dimension, lam, *args, l_max) for args in zip(x, y, c, t)]
    p = np.array([v.value for v in vals])
    ind = np.array([v.indicator for v in vals])
    meta = {"source": "bessel_oracle", "lambda": lam,
            "l_max": int(max((v.l_max for v in vals), default=0)),
            "max_cancellation": float(max((v.cancellation for v in vals), default=0.0))}
    return KernelSlice(x, y, c, t, p, ind, dimension, meta)


# ---------------------------------------------------------------- ground state

def ground_state_transform(slice_: KernelSlice, U: HarmonicProfile) -> np.ndarray:
    """``G = p / (U(|x|) U(|y|))``."""
    ux, uy = U(slice_.x), U(slice_.y)
    if np.any(ux <= 0) or np.any(uy <= 0):
        raise DomainError("ground-state transform needs U > 0 at the sampled radii")
    return slice_.p / (ux * uy)


def weighted_conservation(dimension: int, lam: float, U: HarmonicProfile, x: float, t: float) -> float:
    """``int G(x, y, t) omega(y) dy`` for the pure inverse-square kernel.

    Only the radial mode survives the angular integral against the radial
    ``U(|y|)``, so this is ``U(x)^-1 int p_0(x, rho, t) U(rho) rho^(N-1) d rho``.
    """
    from scipy.integrate import quad

    r_lo, r_hi = float(U.r[0]), float(U.r[-1])
    spread = 40.0 * math.sqrt(t)
    hi = min(x + spread, r_hi)
    if x + spread > r_hi:
        raise DomainError("profile grid too short for the conservation integral")

    def f(s):
        rho = math.exp(s)
        return float(oracle_mode(dimension, lam, 0, x, rho, t)) * float(U(rho)) * rho**dimension

    lo, top = math.log(r_lo), math.log(hi)
    cuts = [math.log(v) for v in (x - 4.0 * math.sqrt(t), x, x + 4.0 * math.sqrt(t)) if v > r_lo]
    edges = [lo] + [c for c in cuts if lo < c < top] + [top]
    # the part below r_min is of relative size (r_min/sqrt t)^(N+2a) and is dropped
    total = sum(quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=400)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    return total / float(U(x))
