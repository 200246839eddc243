"""A2 diagnostics and weighted ball masses for ``omega = U**2``."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import betainc, gamma

from .criticality import dominant_branch
from .errors import DomainError
from .harmonic import HarmonicProfile
from .potential import exponents


def sphere_area(dimension: int) -> float:
    """Surface area of the unit sphere in ``R^N``."""
    return 2.0 * math.pi ** (dimension / 2) / gamma(dimension / 2)


def ball_volume(dimension: int, r: float) -> float:
    return math.pi ** (dimension / 2) * r**dimension / gamma(dimension / 2 + 1)


class A2Verdict(str, enum.Enum):
    IS_A2 = "IsA2"
    NOT_A2 = "NotA2"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, eq=False)
class WeightProfile:
    """``omega(r) = U(r)**2`` with its power-law exponents at 0 and infinity."""

    base: HarmonicProfile
    near_zero_power: float
    tail_power_bounds: tuple | None

    @classmethod
    def from_profile(cls, profile: HarmonicProfile) -> "WeightProfile":
        if not profile.positive:
            raise DomainError("omega = U^2 needs a positive harmonic profile")
        near = 2.0 * exponents(profile.dimension, profile.lambda1).a_plus
        tail = profile.tail
        bounds = None
        if tail is not None:
            p = tail.p_plus if dominant_branch(tail) == "plus" and not tail.log_branch else tail.p_minus
            bounds = (2.0 * p, 2.0 * p)
        return cls(profile, near, bounds)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def r_min(self) -> float:
        return float(self.base.r[0])

    @property
    def r_max(self) -> float:
        return float(self.base.r[-1])

    def __call__(self, r, power: float = 1.0):
        # below r_min the profile continues as the r^A+(lambda1) power law
        return np.abs(self.base(r)) ** (2.0 * power)


def a2_quick_test(weight: WeightProfile, dimension: int | None = None, atol: float = 1e-9) -> A2Verdict:
    """Power criterion: ``|x|^p`` is A2 on ``R^N`` iff ``-N < p < N``.

    Applied to the near-zero power ``2 A+(lambda1)`` and to the tail power
    bounds of ``U**2``.
    """
    n_dim = weight.dimension if dimension is None else dimension
    powers = [weight.near_zero_power]
    if weight.tail_power_bounds is not None:
        powers += list(weight.tail_power_bounds)
    if any(abs(p) >= n_dim - atol for p in powers):
        return A2Verdict.NOT_A2
    if weight.tail_power_bounds is None:
        return A2Verdict.INCONCLUSIVE
    return A2Verdict.IS_A2


def cap_fraction(dimension: int, cos_phi):
    """Fraction of the unit sphere ``S^{N-1}`` within polar angle ``phi`` of a pole."""
    c = np.clip(np.asarray(cos_phi, dtype=float), -1.0, 1.0)
    half = 0.5 * betainc(0.5 * (dimension - 1), 0.5, 1.0 - c * c)
    return np.where(c >= 0, half, 1.0 - half)


def _radial_integral(weight: WeightProfile, power: float, lo: float, hi: float, frac=None) -> float:
    """``int_lo^hi omega^power rho^(N-1) frac(rho) d rho``, in ``log rho`` above ``r_min``."""
    if hi <= lo:
        return 0.0
    n_dim = weight.dimension
    total = 0.0
    r0 = weight.r_min
    a = weight.near_zero_power * power
    if lo < r0:
        top = min(hi, r0)
        if frac is None:
            w0 = float(weight(r0, power))
            if n_dim + a <= 0:
                raise DomainError("omega^power is not locally integrable at the origin")
            total += w0 * (top ** (n_dim + a) - lo ** (n_dim + a)) / (n_dim + a) / r0**a
        else:
            total += quad(lambda x: float(weight(x, power)) * x ** (n_dim - 1) * float(frac(x)),
                          lo, top, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        lo = top
    if hi > lo:
        def f(s):
            x = math.exp(s)
            val = float(weight(x, power)) * x**n_dim
            return val if frac is None else val * float(frac(x))

        total += quad(f, math.log(lo), math.log(hi), epsabs=0.0, epsrel=1e-11, limit=400)[0]
    return total


def ball_mass(weight: WeightProfile, center_distance: float, r: float, power: float = 1.0) -> float:
    """``int_{B(x, r)} omega(z)**power dz`` with ``|x| = center_distance``.

    Spheres ``|z| = rho`` fully inside the ball contribute their whole area; the
    rest contribute the spherical cap inside the ball, whose area fraction is
    a regularized incomplete beta function.
    """
    d = float(center_distance)
    if d < 0 or r <= 0:
        raise DomainError("ball_mass needs center_distance >= 0 and r > 0")
    if d + r > weight.r_max * (1 + 1e-12):
        raise DomainError(f"ball shadow reaches {d + r:g} beyond r_max={weight.r_max:g}")
    n_dim = weight.dimension
    area = sphere_area(n_dim)
    if d == 0.0:
        return area * _radial_integral(weight, power, 0.0, r)
    full = _radial_integral(weight, power, 0.0, r - d) if r > d else 0.0

    def frac(rho):
        return cap_fraction(n_dim, (rho * rho + d * d - r * r) / (2.0 * rho * d))

    cap = _radial_integral(weight, power, abs(d - r), d + r, frac)
    return area * (full + cap)


def doubling_ratio(weight: WeightProfile, center_distance: float, r: float) -> float:
    return ball_mass(weight, center_distance, 2 * r) / ball_mass(weight, center_distance, r)


@dataclass(frozen=True)
class A2Estimate:
    """Sampled lower bound on the A2 constant ``[omega]``."""

    value: float
    per_sample: tuple
    skipped: tuple
    lower_bound: bool = True

    def to_dict(self) -> dict:
        return {"value": self.value, "lower_bound": self.lower_bound,
                "samples": [list(s) for s in self.per_sample],
                "skipped": [list(s) for s in self.skipped]}


def a2_constant(weight: WeightProfile, ball_samples) -> A2Estimate:
    """``max (avg_E omega)(avg_E 1/omega)`` over the sampled balls ``E``."""
    rows, skipped = [], []
    for d, r in ball_samples:
        try:
            m_plus = ball_mass(weight, d, r, 1.0)
            m_minus = ball_mass(weight, d, r, -1.0)
        except DomainError as exc:
            warnings.warn(f"ball (|x|={d:g}, r={r:g}) skipped: {exc}")
            skipped.append((float(d), float(r)))
            continue
        vol = ball_volume(weight.dimension, r)
        rows.append((float(d), float(r), float(m_plus * m_minus / vol**2)))
    if not rows:
        return A2Estimate(float("nan"), (), tuple(skipped))
    return A2Estimate(max(v for *_, v in rows), tuple(rows), tuple(skipped))


def ball_mass_table(weight: WeightProfile, samples, path=None):
    """Rows ``(|x|, r, mass)``; written as CSV when ``path`` is given."""
    rows = np.array([(d, r, ball_mass(weight, d, r)) for d, r in samples], dtype=float)
    if path is not None:
        from .io import write_csv

        write_csv(path, ["x", "r", "mass"], rows.T)
    return rows
