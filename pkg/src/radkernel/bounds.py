"""Heat-kernel envelopes, constant fitting and the supersolution check."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .criticality import dominant_branch
from .errors import BracketError, CoverageError, DomainError, HypothesisError
from .grid import radial_laplacian
from .harmonic import FProfile, HarmonicProfile
from .heatkernel import KernelSlice, distance_sq
from .potential import PotentialSpec, exponents, is_hardy_critical
from .weights import A2Verdict, WeightProfile, a2_quick_test, ball_mass


class EnvelopeKind(str, enum.Enum):
    TWO_SIDED = "TwoSidedThm12"
    GLOBAL = "GlobalEq16"
    POLYNOMIAL = "PolynomialProp11"
    GAUSSIAN = "GaussianEq49"


class Side(str, enum.Enum):
    UPPER = "Upper"
    LOWER = "Lower"


@dataclass(frozen=True, eq=False)
class Envelope:
    """``C * P(x, y, t) * exp(-|x-y|^2 / (C t))``, or rate ``4 + eps`` for the Gaussian kind."""

    kind: EnvelopeKind
    profile: HarmonicProfile
    weight: WeightProfile | None = None
    epsilon: float = 0.5
    _masses: dict = field(default_factory=dict, repr=False)

    @property
    def dimension(self) -> int:
        return self.profile.dimension

    def ball(self, center: float, radius: float) -> float:
        key = (float(center), float(radius))
        if key not in self._masses:
            self._masses[key] = ball_mass(self.weight, *key)
        return self._masses[key]

    def prefactor(self, x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        U = self.profile
        if self.kind in (EnvelopeKind.TWO_SIDED, EnvelopeKind.GAUSSIAN):
            st = np.sqrt(t)
            bx = np.array([self.ball(a, b) for a, b in zip(x.ravel(), st.ravel())]).reshape(x.shape)
            by = np.array([self.ball(a, b) for a, b in zip(y.ravel(), st.ravel())]).reshape(x.shape)
            return U(x) * U(y) / np.sqrt(bx * by)
        st = np.sqrt(t)
        return t ** (-self.dimension / 2) * U(np.minimum(x, st)) * U(np.minimum(y, st)) / U(st) ** 2

    def rate_denominator(self, C):
        return 4.0 + self.epsilon if self.kind is EnvelopeKind.GAUSSIAN else C


def make_envelope(kind, profile: HarmonicProfile, spec: PotentialSpec | None = None,
                  critical: bool | None = None, epsilon: float = 0.5) -> Envelope:
    """Build an envelope, refusing profiles outside its hypotheses."""
    kind = EnvelopeKind(kind)
    n_dim = profile.dimension
    weight = None
    if kind in (EnvelopeKind.TWO_SIDED, EnvelopeKind.GAUSSIAN):
        weight = WeightProfile.from_profile(profile)
        verdict = a2_quick_test(weight)
        if verdict is A2Verdict.NOT_A2:
            raise HypothesisError("omega = U^2 fails the A2 power criterion; the two-sided bound does not apply")
        if verdict is A2Verdict.INCONCLUSIVE:
            warnings.warn("A2 status of omega = U^2 is inconclusive")
    if kind is EnvelopeKind.GLOBAL:
        if critical is None:
            if profile.tail is None:
                raise HypothesisError("criticality unknown: supply critical= or a profile with a tail fit")
            critical = dominant_branch(profile.tail) == "minus"
        a_minus = exponents(n_dim, profile.lambda2).a_minus
        if critical and a_minus <= -n_dim / 2:
            raise HypothesisError(f"critical operator with A-(lambda2)={a_minus:.4g} <= -N/2: "
                                  "the global upper bound is not available")
    if kind is EnvelopeKind.POLYNOMIAL:
        if spec is None:
            raise HypothesisError("the polynomial envelope needs the potential to check V >= 0")
        if np.any(spec.r2v(profile.r) < 0):
            raise HypothesisError("the polynomial envelope requires V >= 0")
    return Envelope(kind, profile, weight, epsilon)


def envelope_eval(env: Envelope, x, y, cos_theta, t, C: float):
    """Envelope value with the single constant ``C`` in prefactor and exponent."""
    if C <= 0:
        raise DomainError("envelope constant must be positive")
    pref = env.prefactor(x, y, t)
    d2t = distance_sq(x, y, cos_theta) / np.asarray(t, dtype=float)
    out = C * pref * np.exp(-d2t / env.rate_denominator(C))
    return float(out) if np.ndim(out) == 0 else out


def display_envelope(dimension: int, lam: float, x, y, cos_theta, t, C: float):
    """``C t^(-N/2+s) min(|x|,sqrt t)^-s min(|y|,sqrt t)^-s exp(-d^2/Ct)`` with ``s = -A+(lam)``."""
    s = exponents(dimension, lam).sigma
    x, y, c, t = (np.asarray(v, dtype=float) for v in (x, y, cos_theta, t))
    st = np.sqrt(t)
    out = (C * t ** (-dimension / 2 + s) * np.minimum(x, st) ** (-s) * np.minimum(y, st) ** (-s)
           * np.exp(-distance_sq(x, y, c) / (C * t)))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FitReport:
    kind: str
    side: Side
    fitted_constant: float
    worst_sample: tuple
    ratio_stats: dict
    samples: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "side": self.side.value, "fitted_constant": self.fitted_constant,
                "worst_sample": dict(zip(("x", "y", "cos_theta", "t"), self.worst_sample)),
                "ratio_stats": self.ratio_stats, "samples": self.samples}


def _ratio_stats(r):
    return {"min": float(np.min(r)), "max": float(np.max(r)), "median": float(np.median(r)),
            "spread": float(np.max(r) / np.min(r))}


def fit_constant(slice_: KernelSlice, env: Envelope, side=Side.UPPER, c_bracket=(1e-8, 1e8),
                 rtol: float = 1e-12) -> FitReport:
    """Smallest upper (largest lower) constant by bisection in ``log C``.

    Every envelope here increases strictly with ``C``, so feasibility is
    monotone and the bisection is exact up to ``rtol``.
    """
    side = Side(side)
    if np.any(slice_.p <= 0):
        raise DomainError("kernel samples must be positive")
    pref = env.prefactor(slice_.x, slice_.y, slice_.t)
    d2t = slice_.distance_sq / slice_.t
    p = slice_.p

    def env_at(C):
        return C * pref * np.exp(-d2t / env.rate_denominator(C))

    def feasible(C):
        e = env_at(C)
        return bool(np.all(p <= e)) if side is Side.UPPER else bool(np.all(p >= e))

    lo, hi = map(float, c_bracket)
    if side is Side.UPPER:
        if not feasible(hi):
            raise BracketError(f"upper side: no constant <= {hi:g} dominates the kernel")
        if feasible(lo):
            raise BracketError(f"upper side: already feasible at the lower bracket end {lo:g}")
    else:
        if not feasible(lo):
            raise BracketError(f"lower side: kernel not above the envelope even at C={lo:g}")
        if feasible(hi):
            raise BracketError(f"lower side: still feasible at the upper bracket end {hi:g}")
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol:
        mid = 0.5 * (a + b)
        ok = feasible(math.exp(mid))
        if (side is Side.UPPER) == ok:
            b = mid
        else:
            a = mid
    C = math.exp(b) if side is Side.UPPER else math.exp(a)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = p / env_at(C)
    k = int(np.argmax(ratio) if side is Side.UPPER else np.argmin(ratio))
    worst = (float(slice_.x[k]), float(slice_.y[k]), float(slice_.cos_theta[k]), float(slice_.t[k]))
    return FitReport(env.kind.value, side, C, worst, _ratio_stats(ratio), int(p.size))


def ratio_scatter(slice_: KernelSlice, env: Envelope, C: float, path=None):
    """Columns ``|x-y|^2/t`` and ``p / envelope``; CSV when ``path`` is given."""
    d2t = slice_.distance_sq / slice_.t
    ratio = slice_.p / envelope_eval(env, slice_.x, slice_.y, slice_.cos_theta, slice_.t, C)
    if path is not None:
        from .io import write_csv

        write_csv(path, ["d2_over_t", "ratio"], [d2t, ratio])
    return d2t, ratio


@dataclass(frozen=True)
class RateReport:
    slope: float
    intercept: float
    threshold: float
    passed: bool
    samples: int
    window: tuple

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "threshold": self.threshold,
                "passed": self.passed, "samples": self.samples, "window": list(self.window)}


def gaussian_rate(slice_: KernelSlice, eps: float = 0.5, env: Envelope | None = None,
                  window=(10.0, 100.0), min_samples: int = 5) -> RateReport:
    """Slope of ``-log(p / P)`` against ``|x-y|^2/t`` on far-field samples.

    ``P`` is the envelope prefactor when ``env`` is given, otherwise the
    Euclidean ``(4 pi t)^(-N/2)``. Far field: ``|x-y|^2/t`` in ``window`` and
    both radii at least ``sqrt t``.
    """
    d2t = slice_.distance_sq / slice_.t
    st = np.sqrt(slice_.t)
    mask = (d2t >= window[0]) & (d2t <= window[1]) & (slice_.x >= st) & (slice_.y >= st)
    if np.count_nonzero(mask) < min_samples:
        raise CoverageError(f"only {np.count_nonzero(mask)} far-field samples in {window}")
    sub = slice_.subset(mask)
    if np.max(d2t[mask]) < 5.0 * np.min(d2t[mask]):
        raise CoverageError("far-field samples do not span the window")
    if env is None:
        pref = (4.0 * np.pi * sub.t) ** (-sub.dimension / 2)
    else:
        pref = env.prefactor(sub.x, sub.y, sub.t)
    yv = -np.log(sub.p / pref)
    slope, intercept = np.polyfit(d2t[mask], yv, 1)
    threshold = 1.0 / (4.0 + eps)
    return RateReport(float(slope), float(intercept), threshold, bool(slope >= threshold),
                      int(mask.sum()), tuple(window))


# ---------------------------------------------------------------- supersolution

def _log_factor(s, c):
    return s / ((c + s) * np.log(c + s))


def zeta_kappa(gamma1: float, gamma2: float, c: float, T: float = 0.0, s_max: float = 1e12) -> float:
    """``kappa = sup_{s>T} -s zeta'(s)/zeta(s)`` for ``zeta = s^g1 log(c+s)^g2``."""
    if c <= 1:
        raise DomainError("zeta needs c > 1")
    s_lo = max(T, 1e-12)
    probe = np.geomspace(s_lo, s_max, 4001)[1:]
    dlog = gamma1 / probe + gamma2 / ((c + probe) * np.log(c + probe))
    if np.any(dlog > 0):
        bad = probe[np.argmax(dlog > 0)]
        raise HypothesisError(f"zeta is not decreasing on (T, inf): increases near s={bad:.3g}")
    if gamma2 == 0:
        return float(-gamma1)
    vals = -gamma1 - gamma2 * _log_factor(probe, c)
    best = float(np.max(vals))
    # limits at both ends of (T, inf)
    best = max(best, float(-gamma1 - gamma2 * _log_factor(T, c)) if T > 0 else -gamma1, -gamma1)
    k = int(np.argmax(vals))
    if 0 < k < probe.size - 1:
        res = minimize_scalar(lambda u: gamma2 * _log_factor(math.exp(u), c),
                              bounds=(math.log(probe[k - 1]), math.log(probe[k + 1])),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, float(-gamma1 - res.fun))
    return best


def zeta_for(spec: PotentialSpec, profile: HarmonicProfile, critical: bool | None = None):
    """The ``(gamma1, gamma2, c)`` of the zeta used for the global upper bound."""
    n_dim = spec.dimension
    if critical is None:
        critical = dominant_branch(profile.tail) == "minus"
    ex = exponents(n_dim, spec.lambda2)
    d = ex.a_minus if critical else ex.a_plus
    log_case = (not critical) and is_hardy_critical(n_dim, spec.lambda2)
    return (-(n_dim + d) / 2.0, -1.0 if log_case else 0.0, 2.0)


@dataclass(frozen=True)
class SupersolutionReport:
    min_residual: float
    tolerance: float
    passed: bool
    worst_point: tuple
    w_nonpositive: bool
    violations: int
    resolved_fraction: float

    def to_dict(self) -> dict:
        return {"min_residual": self.min_residual, "tolerance": self.tolerance, "passed": self.passed,
                "worst_point": list(self.worst_point), "w_nonpositive": self.w_nonpositive,
                "violations": self.violations, "resolved_fraction": self.resolved_fraction}


def _residual(U, F, r, V, n_dim, t, zeta, kappa):
    g1, g2, c = zeta
    z = t**g1 * np.log(c + t) ** g2
    dz = z * (g1 / t + g2 / ((c + t) * np.log(c + t)))
    LU = radial_laplacian(U, r, n_dim) - V[1:-1] * U[1:-1]
    LF = radial_laplacian(F, r, n_dim) - V[1:-1] * F[1:-1]
    u, f = U[1:-1], F[1:-1]
    terms = [dz * u, kappa * (z / t**2 - dz / t) * f, -z * LU, kappa * z / t * LF]
    res = sum(terms)
    scale = sum(np.abs(x) for x in terms)
    return res, scale


def verify_supersolution(U: HarmonicProfile, FU: FProfile, zeta, kappa: float, spec: PotentialSpec,
                         times, r_range=None, safety: float = 2.0) -> SupersolutionReport:
    """Discrete ``d_t w - Delta w + V w`` for ``w = zeta(t) [U - kappa F[U] / t]``.

    The Laplacian is a centered difference on the profile grid. Residuals are
    compared on nodes shared with the every-other-node grid; the pass
    threshold is ``safety`` times the Richardson error estimate
    ``|R_2h - R_h| / 3`` plus a rounding floor. Where ``r`` is far below
    ``sqrt t`` the exact residual is beneath the difference error of
    ``Delta U``; ``resolved_fraction`` reports how much of the region the
    check actually resolves.
    """
    r = U.r
    sel = np.ones(r.size, dtype=bool) if r_range is None else (r >= r_range[0]) & (r <= r_range[1])
    idx = np.nonzero(sel)[0]
    if idx.size < 5:
        raise DomainError("verification range holds fewer than 5 grid nodes")
    if idx.size % 2 == 0:
        idx = idx[:-1]
    rf = r[idx]
    Uf, Ff = U.values[idx], FU.values[idx]
    Vf = spec.r2v(rf) / rf**2
    n_dim = spec.dimension
    worst = (math.inf, None)
    tol_max, n_bad, w_neg = 0.0, 0, False
    n_resolved = n_total = 0
    for t in np.atleast_1d(np.asarray(times, dtype=float)):
        res_f, scale_f = _residual(Uf, Ff, rf, Vf, n_dim, t, zeta, kappa)
        res_c, _ = _residual(Uf[::2], Ff[::2], rf[::2], Vf[::2], n_dim, t, zeta, kappa)
        # compare on the nodes shared by both grids
        res_f, scale_f = res_f[1::2], scale_f[1::2]
        tol = safety * np.abs(res_c - res_f) / 3.0 + 1e-12 * scale_f
        rel = res_f / scale_f
        bad = res_f < -tol
        n_bad += int(bad.sum())
        k = int(np.argmin(rel))
        if rel[k] < worst[0]:
            worst = (float(rel[k]), (float(rf[2:-1:2][k]), float(t)))
        tol_max = max(tol_max, float(np.max(tol / scale_f)))
        # a node is resolved when the error bound is small against the residual terms
        n_resolved += int(np.count_nonzero(tol < 0.1 * scale_f))
        n_total += tol.size
        w = Uf - kappa * Ff / t
        w_neg = w_neg or bool(np.any(w <= 0))
    return SupersolutionReport(worst[0], tol_max, n_bad == 0, worst[1], w_neg, n_bad,
                               n_resolved / n_total)


# ---------------------------------------------------------------- CKN

def ckn_p0(dimension: int, alpha: float) -> float:
    """``p0 = 2(N - 2 alpha) / (N - 2 - 2 alpha)``, defined for ``N > 2 + 2 alpha``."""
    if dimension <= 2 + 2 * alpha:
        raise DomainError(f"p0 needs N > 2 + 2 alpha (got N={dimension}, alpha={alpha}); "
                          "for N <= 2 + 2 alpha a Gagliardo-Nirenberg inequality replaces it")
    return 2.0 * (dimension - 2.0 * alpha) / (dimension - 2.0 - 2.0 * alpha)
