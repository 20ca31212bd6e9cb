"""Exemplar multiply-connected configuration spaces and their covers.

Every geometry here has deck group Z: the cover unrolls the angle, and a
point of the cover is stored as (base coordinates, integer winding) so that
floats stay bounded.  The angular fundamental domain is [0, period) with
period 2*pi, except for the two-anyon relative coordinate where the
generator is the particle exchange theta -> theta + pi.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .words import Word

MIN_GRID = 8


class GeometryError(ValueError):
    pass


class Kind(str, enum.Enum):
    RING = "ring"
    ANNULUS = "annulus"
    TWO_ANYON = "two_anyon"
    SPIN_ANNULUS = "spin_annulus"


@dataclass(frozen=True)
class CoverPoint:
    base_coords: tuple[float, ...]
    winding: int = 0


@dataclass(frozen=True)
class Geometry:
    kind: Kind
    grid: tuple[int, ...]
    radius: float = 1.0
    r_in: float | None = None
    r_out: float | None = None
    mass: float = 1.0
    hbar: float = 1.0
    # >1 builds the intermediate cover whose fundamental domain spans that
    # many copies; its generator is the base generator to this power
    sheets: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "grid", tuple(int(n) for n in self.grid))
        if self.kind is Kind.RING:
            if len(self.grid) != 1:
                raise GeometryError(f"ring grid must be [n_theta], got {list(self.grid)}")
            if not self.radius > 0:
                raise GeometryError("ring radius must be positive")
        else:
            if len(self.grid) != 2:
                raise GeometryError(f"{self.kind.value} grid must be [n_r, n_theta], got {list(self.grid)}")
            if self.r_in is None or self.r_out is None:
                raise GeometryError(f"{self.kind.value} needs r_in and r_out")
            if not 0 < self.r_in < self.r_out:
                raise GeometryError(f"need 0 < r_in < r_out, got r_in={self.r_in}, r_out={self.r_out}")
        if any(n < MIN_GRID for n in self.grid):
            raise GeometryError(f"grid entries must be >= {MIN_GRID}, got {list(self.grid)}")
        if self.sheets < 1:
            raise GeometryError("sheets must be >= 1")
        if not self.mass > 0:
            raise GeometryError("mass must be positive")

    @property
    def base_period(self) -> float:
        return math.pi if self.kind is Kind.TWO_ANYON else 2 * math.pi

    @property
    def period(self) -> float:
        return self.sheets * self.base_period

    def covering(self, sheets: int) -> "Geometry":
        """The cover whose domain glues ``sheets`` fundamental domains."""
        return dataclasses.replace(self, grid=self.grid[:-1] + (self.grid[-1] * sheets,), sheets=self.sheets * sheets)

    @property
    def ndim(self) -> int:
        return 1 if self.kind is Kind.RING else 2

    @property
    def fiber_dim(self) -> int:
        return 2 if self.kind is Kind.SPIN_ANNULUS else 1

    @property
    def generator(self) -> str:
        # the exchange braid for two anyons, a plain circuit otherwise
        return "s1" if self.kind is Kind.TWO_ANYON else "a"

    @property
    def n_theta(self) -> int:
        return self.grid[-1]

    def volume(self) -> float:
        if self.kind is Kind.RING:
            return self.period * self.radius
        return 0.5 * self.period * (self.r_out**2 - self.r_in**2)

    # -- covering space -----------------------------------------------------

    def contains(self, coords) -> bool:
        coords = tuple(coords)
        if len(coords) != self.ndim:
            return False
        theta = coords[-1]
        if not 0.0 <= theta < self.period:
            return False
        if self.ndim == 2:
            return self.r_in <= coords[0] <= self.r_out
        return True

    def point(self, *coords: float, winding: int = 0) -> CoverPoint:
        if not self.contains(coords):
            raise GeometryError(f"{coords} outside the fundamental domain of {self.kind.value}")
        return CoverPoint(tuple(float(c) for c in coords), int(winding))

    def lift(self, coords, winding: int = 0) -> CoverPoint:
        """Cover point over arbitrary (unwrapped) coordinates."""
        coords = list(coords)
        turns = math.floor(coords[-1] / self.period)
        coords[-1] -= turns * self.period
        if coords[-1] >= self.period:  # rounding at the seam
            coords[-1] -= self.period
            turns += 1
        return self.point(*coords, winding=winding + turns)

    def unrolled(self, p: CoverPoint) -> tuple[float, ...]:
        """Coordinates of p in the cover itself (angle unwrapped)."""
        return p.base_coords[:-1] + (p.base_coords[-1] + p.winding * self.period,)

    def _check_word(self, sigma: Word) -> int:
        extra = sigma.generators() - {self.generator}
        if extra:
            raise GeometryError(f"generators {sorted(extra)} not in deck group of {self.kind.value}")
        return sigma.exponent_sums().get(self.generator, 0)

    def project(self, p: CoverPoint) -> tuple[float, ...]:
        return p.base_coords

    def deck_act(self, sigma: Word, p: CoverPoint) -> CoverPoint:
        return CoverPoint(p.base_coords, p.winding + self._check_word(sigma))

    def deck_to_loop(self, sigma: Word, basepoint: CoverPoint | None = None) -> Word:
        """Homotopy class of the projected path from basepoint to sigma*basepoint.

        The deck group is abelian, so the identification with pi_1 does not
        depend on the basepoint.
        """
        n = self._check_word(sigma)
        return Word.gen(self.generator, n)


@dataclass(frozen=True)
class GridSpec:
    geometry: Geometry
    theta: np.ndarray
    dtheta: float
    r: np.ndarray | None
    dr: float | None
    weights: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)
    theta_next: np.ndarray = field(repr=False)
    theta_prev: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.geometry.grid

    @property
    def n_active(self) -> int:
        return int(self.active.sum()) * self.geometry.fiber_dim

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(R, THETA) arrays of grid shape; R is the ring radius for rings."""
        if self.r is None:
            return np.full_like(self.theta, self.geometry.radius), self.theta.copy()
        return np.meshgrid(self.r, self.theta, indexing="ij")


def build_grid(g: Geometry) -> GridSpec:
    n_theta = g.n_theta
    dtheta = g.period / n_theta
    theta = np.arange(n_theta) * dtheta
    theta_next = (np.arange(n_theta) + 1) % n_theta
    theta_prev = (np.arange(n_theta) - 1) % n_theta
    if g.kind is Kind.RING:
        weights = np.full(n_theta, g.radius * dtheta)
        active = np.ones(n_theta, dtype=bool)
        return GridSpec(g, theta, dtheta, None, None, weights, active, theta_next, theta_prev)

    n_r = g.grid[0]
    r = np.linspace(g.r_in, g.r_out, n_r)
    dr = (g.r_out - g.r_in) / (n_r - 1)
    # trapezoid in r is exact for the linear factor r
    radial = r * dr
    radial[0] *= 0.5
    radial[-1] *= 0.5
    weights = np.outer(radial, np.full(n_theta, dtheta))
    active = np.zeros((n_r, n_theta), dtype=bool)
    active[1:-1, :] = True
    return GridSpec(g, theta, dtheta, r, dr, weights, active, theta_next, theta_prev)
