"""Subcritical / critical / supercritical verdicts and the coupling threshold ``mu*``."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import BracketError, DomainError, UnclassifiableError
from .grid import RadialGrid, default_grid
from .harmonic import (HarmonicProfile, TailFit, ZeroCrossing, fit_tail, positivity_scan,
                       solve_harmonic)
from .potential import Bump, PotentialSpec, is_hardy_critical, validate_asymptotics

KAPPA_SEP = 10.0
RESIDUAL_MAX = 1e-4


class Verdict(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class CriticalityReport:
    verdict: Verdict
    case_label: str
    tail: TailFit | None = None
    zero: ZeroCrossing | None = None
    branch_ratio: float | None = None
    r_max: float | None = None

    @property
    def evidence(self):
        return self.zero if self.verdict is Verdict.SUPERCRITICAL else self.tail

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "case_label": self.case_label,
            "tail": None if self.tail is None else self.tail.to_dict(),
            "first_zero": None if self.zero is None else self.zero.radius,
            "branch_ratio": self.branch_ratio,
            "r_max": self.r_max,
        }


def dominant_branch(tail: TailFit, kappa_sep: float = KAPPA_SEP, r: float | None = None) -> str:
    """``"plus"`` if the growing (or log) branch beats the other by ``kappa_sep`` at ``r``."""
    big, small = tail.branch_magnitudes(r)
    return "plus" if big > kappa_sep * small else "minus"


def verdict_from_profile(profile: HarmonicProfile, kappa_sep: float = KAPPA_SEP,
                         residual_max: float = RESIDUAL_MAX) -> CriticalityReport:
    r_max = float(profile.r[-1])
    zero = positivity_scan(profile)
    if zero is not None:
        return CriticalityReport(Verdict.SUPERCRITICAL, "none", profile.tail, zero, None, r_max)
    tail = profile.tail if profile.tail is not None else fit_tail(profile)
    if tail.residual > residual_max:
        raise UnclassifiableError(
            f"unclassifiable at r_max={r_max:g}: tail fit residual {tail.residual:.2e} exceeds "
            f"{residual_max:.0e}; enlarge the domain")
    big, small = tail.branch_magnitudes(r_max)
    ratio = big / small if small > 0 else math.inf
    hardy = is_hardy_critical(profile.dimension, profile.lambda2)
    if big > kappa_sep * small:
        return CriticalityReport(Verdict.SUBCRITICAL, "c" if hardy else "a", tail, None, ratio, r_max)
    return CriticalityReport(Verdict.CRITICAL, "d" if hardy else "b", tail, None, ratio, r_max)


def classify_operator(spec: PotentialSpec, grid: RadialGrid | None = None, validate: bool = True,
                      kappa_sep: float = KAPPA_SEP, residual_max: float = RESIDUAL_MAX,
                      profile: HarmonicProfile | None = None) -> CriticalityReport:
    """Shooting criterion: a zero of ``U`` means supercritical, otherwise the tail decides."""
    if validate:
        validate_asymptotics(spec).raise_for_status()
    if profile is None:
        profile = solve_harmonic(spec, grid)
    return verdict_from_profile(profile, kappa_sep, residual_max)


@dataclass(frozen=True)
class MuSample:
    mu: float
    has_zero: bool
    zero_radius: float | None


@dataclass(frozen=True)
class MuStarResult:
    mu_star: float
    bracket: tuple
    bracket_width: float
    iterations: int
    verdicts_at_bracket: tuple
    trace: tuple = field(default=())

    @property
    def monotone(self) -> bool:
        """The zero predicate never switches back from True to False along increasing ``mu``."""
        seen = False
        for s in sorted(self.trace, key=lambda s: s.mu):
            if seen and not s.has_zero:
                return False
            seen = seen or s.has_zero
        return True

    def to_dict(self) -> dict:
        return {
            "mu_star": self.mu_star,
            "bracket": list(self.bracket),
            "bracket_width": self.bracket_width,
            "iterations": self.iterations,
            "monotone": self.monotone,
            "verdicts_at_bracket": [v.to_dict() for v in self.verdicts_at_bracket],
            "trace": [{"mu": s.mu, "has_zero": s.has_zero, "zero_radius": s.zero_radius}
                      for s in self.trace],
        }


def perturbed(spec: PotentialSpec, bump: Bump, mu: float) -> PotentialSpec:
    """``V - mu W``."""
    return spec.with_bump(bump.scaled(-mu))


def find_mu_star(spec: PotentialSpec, bump: Bump, bracket=(0.0, 10.0), tol: float = 5e-3,
                 grid: RadialGrid | None = None, max_iter: int = 200) -> MuStarResult:
    """Bisection on ``mu`` for the predicate "``U`` of ``V - mu W`` has a zero"."""
    if bump.coeff <= 0:
        raise DomainError("W must be nonnegative and not identically zero (coeff > 0)")
    grid = default_grid() if grid is None else grid
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise BracketError("bracket must satisfy mu_lo < mu_hi")
    trace = []

    def probe(mu):
        prof = solve_harmonic(perturbed(spec, bump, mu), grid)
        z = positivity_scan(prof)
        trace.append(MuSample(mu, z is not None, None if z is None else z.radius))
        return prof, z is not None

    prof_lo, zero_lo = probe(lo)
    prof_hi, zero_hi = probe(hi)
    if zero_lo == zero_hi:
        state = "supercritical" if zero_lo else "nonnegative"
        raise BracketError(f"bracket [{lo:g}, {hi:g}] does not straddle mu*: both ends are {state}")
    if zero_lo:
        raise BracketError(f"bracket is reversed: mu_lo={lo:g} is supercritical, mu_hi={hi:g} is not")
    it = 0
    while hi - lo >= tol:
        if it >= max_iter:
            break
        mid = 0.5 * (lo + hi)
        prof, has_zero = probe(mid)
        if has_zero:
            hi, prof_hi = mid, prof
        else:
            lo, prof_lo = mid, prof
        it += 1
    reports = (verdict_from_profile(prof_lo), verdict_from_profile(prof_hi))
    return MuStarResult(0.5 * (lo + hi), (lo, hi), hi - lo, it, reports, tuple(trace))
