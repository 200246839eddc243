"""Positive harmonic functions, criticality and heat-kernel envelopes for radial
Schrodinger operators ``-Delta + V(|x|)`` with inverse-square asymptotics."""

__version__ = "0.1.0"

from .potential import (Bump, Exponents, PotentialSpec, blended, exponents, hardy_floor,  # noqa: E402
                        mode_potential, pure, residual, step_well, validate_asymptotics, zero)
from .grid import RadialGrid  # noqa: E402
from ._core import BACKEND  # noqa: E402

__all__ = [
    "BACKEND", "Bump", "Exponents", "PotentialSpec", "RadialGrid", "blended", "exponents",
    "hardy_floor", "mode_potential", "pure", "residual", "step_well", "validate_asymptotics", "zero",
]
