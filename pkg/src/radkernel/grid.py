"""Log-spaced radial grids and finite-difference helpers on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Geometric grid ``r_min * q**i`` ending exactly at ``r_max``."""

    r_min: float
    r_max: float
    points_per_decade: int
    nodes: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise DomainError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if self.points_per_decade < 1:
            raise DomainError("points_per_decade must be >= 1")
        if self.nodes is None:
            decades = math.log10(self.r_max / self.r_min)
            n = max(2, int(round(decades * self.points_per_decade)) + 1)
            nodes = np.exp(np.linspace(math.log(self.r_min), math.log(self.r_max), n))
            nodes[0] = self.r_min
            nodes[-1] = self.r_max
            object.__setattr__(self, "nodes", nodes)
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_nodes(cls, nodes, points_per_decade=None):
        nodes = np.array(nodes, dtype=float)
        if points_per_decade is None:
            points_per_decade = int(round((nodes.size - 1) / math.log10(nodes[-1] / nodes[0])))
        return cls(float(nodes[0]), float(nodes[-1]), points_per_decade, nodes)

    def __len__(self):
        return self.nodes.size

    @property
    def log_step(self) -> float:
        return math.log(self.r_max / self.r_min) / (self.nodes.size - 1)

    @property
    def ratio(self) -> float:
        return math.exp(self.log_step)

    def refine(self, factor: int = 2) -> "RadialGrid":
        """Grid with ``factor`` times the density, containing every current node."""
        n = (self.nodes.size - 1) * factor + 1
        nodes = np.exp(np.linspace(math.log(self.r_min), math.log(self.r_max), n))
        nodes[::factor] = self.nodes
        return RadialGrid(self.r_min, self.r_max, self.points_per_decade * factor, nodes)

    def coarsen(self, factor: int = 2) -> "RadialGrid":
        if (self.nodes.size - 1) % factor:
            raise DomainError("grid size not divisible by the coarsening factor")
        return RadialGrid(self.r_min, self.r_max, max(1, self.points_per_decade // factor),
                          self.nodes[::factor].copy())

    def upto(self, r: float) -> "RadialGrid":
        """Leading part of the grid, ending at the last node <= r."""
        k = int(np.searchsorted(self.nodes, r * (1 + 1e-12), side="right"))
        if k < 2:
            raise DomainError(f"r={r} leaves fewer than two grid nodes")
        return RadialGrid.from_nodes(self.nodes[:k].copy(), self.points_per_decade)

    def to_dict(self) -> dict:
        return {"r_min": self.r_min, "r_max": self.r_max,
                "points_per_decade": self.points_per_decade, "size": int(self.nodes.size)}


def default_grid() -> RadialGrid:
    return RadialGrid(1e-6, 1e6, 64)


def fd_derivatives(values, r):
    """First and second derivatives by three-point centered differences.

    Interior nodes only; the returned arrays have ``len(r) - 2`` entries.
    """
    values = np.asarray(values, dtype=float)
    r = np.asarray(r, dtype=float)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    um, u0, up = values[:-2], values[1:-1], values[2:]
    d1 = (hm**2 * up - hp**2 * um + (hp**2 - hm**2) * u0) / (hm * hp * (hm + hp))
    d2 = 2.0 * (hm * up - (hm + hp) * u0 + hp * um) / (hm * hp * (hm + hp))
    return d1, d2


def radial_laplacian(values, r, dimension):
    """Centered-difference ``u'' + (N-1)/r u'`` at interior nodes."""
    d1, d2 = fd_derivatives(values, r)
    return d2 + (dimension - 1) / np.asarray(r)[1:-1] * d1
