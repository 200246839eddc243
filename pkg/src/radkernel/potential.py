"""Radial potentials with inverse-square asymptotics and their exponents.

A potential ``V(r)`` is described declaratively by :class:`PotentialSpec`.
Its behaviour is pinned down by the limits of ``r**2 V(r)``: ``lambda1`` as
``r -> 0`` and ``lambda2`` as ``r -> inf``, each approached at rate ``theta``.
Both must be at least the Hardy constant ``-(N-2)**2/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import AsymptoticsError, DomainError

FAMILIES = ("pure", "blended", "zero", "bump")
LAMBDA_ATOL = 1e-12


def hardy_constant(dimension: int) -> float:
    return -((dimension - 2) ** 2) / 4.0


def is_hardy_critical(dimension: int, lam: float) -> bool:
    return abs(lam - hardy_constant(dimension)) <= LAMBDA_ATOL


@dataclass(frozen=True)
class Exponents:
    a_plus: float
    a_minus: float
    discriminant: float

    @property
    def sigma(self) -> float:
        return -self.a_plus


def exponents(dimension: int, lam: float) -> Exponents:
    """Roots of ``a**2 + (N-2) a - lam = 0``, ordered ``a_minus <= a_plus``."""
    if dimension < 2:
        raise DomainError("dimension must be >= 2")
    lam_star = hardy_constant(dimension)
    if lam < lam_star - LAMBDA_ATOL:
        raise DomainError(
            f"supercritical inverse-square coefficient: lambda={lam} < {lam_star}")
    b = dimension - 2.0
    if is_hardy_critical(dimension, lam):
        root = -b / 2.0
        return Exponents(root, root, 0.0)
    disc = b * b + 4.0 * lam
    sq = math.sqrt(disc)
    a_minus = (-b - sq) / 2.0
    # Vieta for the root that would suffer cancellation
    a_plus = -lam / a_minus if a_minus != 0.0 else sq / 2.0
    return Exponents(a_plus, a_minus, disc)


def _cos_ramp(x):
    """Smooth step from 1 (x <= -1) to 0 (x >= 1), C^1."""
    x = np.clip(x, -1.0, 1.0)
    return 0.5 * (1.0 - np.sin(0.5 * np.pi * x))


@dataclass(frozen=True)
class Bump:
    """Compactly supported, continuous profile ``coeff * W(r)``.

    ``W`` equals 1 on ``[inner, outer]`` and falls to 0 across ramps of
    half-width ``width`` centred on each edge; ``inner = 0`` gives a ball that
    contains the origin.
    """

    coeff: float = 1.0
    outer: float = 1.0
    inner: float = 0.0
    width: float = 1e-3

    def __post_init__(self):
        if self.width <= 0:
            raise DomainError("bump mollification width must be positive")
        if self.inner < 0 or self.outer <= self.inner:
            raise DomainError("bump needs 0 <= inner < outer")
        if self.inner > 0 and self.inner - self.width < 0:
            raise DomainError("shell bump ramp would cross the origin")

    def shape(self, r):
        r = np.asarray(r, dtype=float)
        w = _cos_ramp((r - self.outer) / self.width)
        if self.inner > 0:
            w = w * (1.0 - _cos_ramp((r - self.inner) / self.width))
        return w

    def __call__(self, r):
        return self.coeff * self.shape(r)

    def scaled(self, factor: float) -> "Bump":
        return replace(self, coeff=self.coeff * factor)

    @property
    def breakpoints(self) -> tuple:
        pts = [self.outer - self.width, self.outer + self.width]
        if self.inner > 0:
            pts += [self.inner - self.width, self.inner + self.width]
        return tuple(sorted(p for p in pts if p > 0))

    @property
    def contains_origin(self) -> bool:
        return self.inner == 0.0

    def to_dict(self) -> dict:
        return {"coeff": self.coeff, "outer": self.outer, "inner": self.inner, "width": self.width}


@dataclass(frozen=True)
class PotentialSpec:
    """Declarative radial potential.

    ``family`` selects the base profile:

    * ``pure``: ``lambda1 / r**2`` (``lambda1 == lambda2``)
    * ``blended``: ``(lambda1 + (lambda2 - lambda1) s(r)) / r**2`` with
      ``s(r) = r**k / (1 + r**k)`` and ``k = sharpness * theta``
    * ``zero``: ``V == 0``
    * ``bump``: inverse-square base plus bumps (alias of ``pure`` kept for
      config files)

    ``bumps`` are added to every family.
    """

    dimension: int
    family: str
    lambda1: float
    lambda2: float
    theta: float = 1.0
    bumps: tuple = field(default=())
    sharpness: float = 2.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise DomainError("dimension must be an integer >= 2")
        if self.family not in FAMILIES:
            raise DomainError(f"unknown potential family {self.family!r}")
        if self.theta <= 0:
            raise DomainError("theta must be positive")
        lam_star = self.lambda_star
        for name in ("lambda1", "lambda2"):
            if getattr(self, name) < lam_star - LAMBDA_ATOL:
                raise DomainError(f"{name}={getattr(self, name)} is below the Hardy constant {lam_star}")
        if self.family in ("pure", "bump") and self.lambda1 != self.lambda2:
            raise DomainError("inverse-square family needs lambda1 == lambda2")
        if self.family == "blended" and self.sharpness <= 1.0:
            raise DomainError("blend sharpness must exceed 1 so the switch beats theta")
        object.__setattr__(self, "bumps", tuple(self.bumps))

    @property
    def lambda_star(self) -> float:
        return hardy_constant(self.dimension)

    @property
    def breakpoints(self) -> tuple:
        return tuple(sorted({p for b in self.bumps for p in b.breakpoints}))

    def _switch(self, r):
        k = self.sharpness * self.theta
        rk = np.power(r, k)
        return np.where(np.isinf(rk), 1.0, rk / (1.0 + rk)), 1.0 / (1.0 + rk)

    def r2v(self, r):
        """``r**2 V(r)``, computed without forming ``V`` for the singular part."""
        r = np.asarray(r, dtype=float)
        if self.family in ("pure", "bump"):
            out = np.full(r.shape, float(self.lambda1))
        elif self.family == "zero":
            out = np.zeros(r.shape)
        else:
            s, _ = self._switch(r)
            out = self.lambda1 + (self.lambda2 - self.lambda1) * s
        for b in self.bumps:
            out = out + r * r * b(r)
        return out

    def r2_residual(self, r, lam):
        """``r**2 V(r) - lam``; exact zero for a pure profile at its own coefficient."""
        r = np.asarray(r, dtype=float)
        if self.family == "blended" and lam in (self.lambda1, self.lambda2):
            s, one_minus_s = self._switch(r)
            d = self.lambda2 - self.lambda1
            out = d * s if lam == self.lambda1 else -d * one_minus_s
            for b in self.bumps:
                out = out + r * r * b(r)
            return out
        if self.family in ("pure", "bump"):
            out = np.full(r.shape, float(self.lambda1) - lam)
            for b in self.bumps:
                out = out + r * r * b(r)
            return out
        return self.r2v(r) - lam

    def __call__(self, r):
        return eval_potential(self, r)

    def with_bump(self, bump: Bump) -> "PotentialSpec":
        return replace(self, bumps=self.bumps + (bump,))

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "family": self.family,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "theta": self.theta,
            "sharpness": self.sharpness,
            "bumps": [b.to_dict() for b in self.bumps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        d = dict(d)
        dim = int(d.pop("dimension"))
        family = d.pop("family")
        bumps = tuple(Bump(**b) for b in d.pop("bumps", []) or [])
        if family in ("pure", "bump"):
            lam = d.pop("lambda", None)
            if lam is None:
                lam = d.pop("lambda1")
            d.pop("lambda2", None)
            return cls(dim, family, lam, lam, d.pop("theta", 1.0), bumps)
        if family == "zero":
            lam1 = d.pop("lambda1", 0.0)
            lam2 = d.pop("lambda2", 0.0)
            return cls(dim, "zero", lam1, lam2, d.pop("theta", 1.0), bumps)
        if family == "blended":
            return cls(dim, "blended", d.pop("lambda1"), d.pop("lambda2"),
                       d.pop("theta", 1.0), bumps, d.pop("sharpness", 2.0))
        raise DomainError(f"unknown potential family {family!r}")


def pure(lam: float, dimension: int = 3) -> PotentialSpec:
    return PotentialSpec(dimension, "pure", lam, lam, 1.0)


def zero(dimension: int = 3) -> PotentialSpec:
    return PotentialSpec(dimension, "zero", 0.0, 0.0, 1.0)


def blended(lambda1: float, lambda2: float, theta: float = 1.0, dimension: int = 3,
            sharpness: float = 2.0) -> PotentialSpec:
    return PotentialSpec(dimension, "blended", lambda1, lambda2, theta, (), sharpness)


def step_well(depth: float, dimension: int = 3, radius: float = 1.0,
              width: float = 1e-3, base: PotentialSpec | None = None) -> PotentialSpec:
    """``base - depth * W`` with ``W`` the mollified indicator of the ball of given radius."""
    base = zero(dimension) if base is None else base
    return base.with_bump(Bump(-depth, radius, 0.0, width))


def eval_potential(spec: PotentialSpec, r):
    """``V(r)`` for ``r > 0`` (array or scalar)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("potential is defined for r > 0 only")
    out = spec.r2v(r_arr) / (r_arr * r_arr)
    return float(out) if np.ndim(r) == 0 else out


def residual(spec: PotentialSpec, r, lam: float):
    """``V(r) - lam / r**2``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("residual is defined for r > 0 only")
    out = spec.r2_residual(r_arr, lam) / (r_arr * r_arr)
    return float(out) if np.ndim(r) == 0 else out


@dataclass(frozen=True)
class AsymptoticsReport:
    passed: bool
    near_radii: np.ndarray
    near_values: np.ndarray
    far_radii: np.ndarray
    far_values: np.ndarray
    tol: float
    message: str = ""

    def raise_for_status(self):
        if not self.passed:
            raise AsymptoticsError(self.message)
        return self


def _limit_ok(values, tol):
    # values ordered from the outermost probe towards the limit
    last = values[-1]
    if not np.all(np.isfinite(values)):
        return False
    return bool(last < tol and last <= values[0] * (1 + 1e-9) + 1e-300)


def validate_asymptotics(spec: PotentialSpec, tol: float = 1e-6,
                         near_decades=(-8.0, -4.0), far_decades=(4.0, 8.0),
                         points_per_decade: int = 8) -> AsymptoticsReport:
    """Probe ``r^-theta |r^2 V - lambda1|`` towards 0 and ``r^theta |r^2 V - lambda2|`` towards infinity."""
    def probe(lo, hi):
        n = int(round((hi - lo) * points_per_decade)) + 1
        return np.logspace(lo, hi, n)

    near_r = probe(*near_decades)[::-1]
    far_r = probe(*far_decades)
    with np.errstate(over="ignore", invalid="ignore"):
        near = near_r ** (-spec.theta) * np.abs(spec.r2_residual(near_r, spec.lambda1))
        far = far_r ** spec.theta * np.abs(spec.r2_residual(far_r, spec.lambda2))
    msgs = []
    if not _limit_ok(near, tol):
        msgs.append(f"asymptotic hypothesis violated as r->0: r^-theta|r^2V-lambda1| = {near[-1]:.3e} "
                    f"at r={near_r[-1]:.1e} (tol {tol:.1e})")
    if not _limit_ok(far, tol):
        msgs.append(f"asymptotic hypothesis violated as r->inf: r^theta|r^2V-lambda2| = {far[-1]:.3e} "
                    f"at r={far_r[-1]:.1e} (tol {tol:.1e})")
    return AsymptoticsReport(not msgs, near_r, near, far_r, far, tol, "; ".join(msgs))


def hardy_floor(spec: PotentialSpec, grid: Sequence[float], margin: float = LAMBDA_ATOL) -> bool:
    """Sufficient certificate of subcriticality: ``inf r^2 V > lambda_*`` on the grid.

    ``False`` means inconclusive.
    """
    r = np.asarray(getattr(grid, "nodes", grid), dtype=float)
    return bool(np.min(spec.r2v(r)) > spec.lambda_star + margin)


def mode_potential(spec: PotentialSpec, l: int) -> PotentialSpec:
    """Effective radial potential ``V + l(l+N-2)/r**2`` of angular mode ``l``.

    The barrier is itself inverse-square, so the result is again a
    :class:`PotentialSpec` with both limits shifted by ``l(l+N-2)``.
    """
    if l < 0:
        raise DomainError("mode index must be >= 0")
    barrier = l * (l + spec.dimension - 2)
    if barrier == 0:
        return spec
    family = "pure" if spec.family == "zero" else spec.family
    return replace(spec, family=family, lambda1=spec.lambda1 + barrier,
                   lambda2=spec.lambda2 + barrier)
