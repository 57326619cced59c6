"""Ego-relative polar geometry and the condition grid.

Conventions used throughout the package: the ego vehicle sits at the origin
facing the +y axis; bearings are measured counterclockwise from the ego
heading and wrapped to (-pi, pi]; distances are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle in radians to the half-open interval (-pi, pi]."""
    w = math.fmod(theta, TWO_PI)
    if w > math.pi:
        w -= TWO_PI
    elif w <= -math.pi:
        w += TWO_PI
    return w


@dataclass(frozen=True, slots=True)
class PolarCoord:
    """Position in the ego-relative polar frame: range r [m], bearing theta [rad]."""

    r: float
    theta: float

    def __post_init__(self):
        if self.r < 0.0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if not (-math.pi < self.theta <= math.pi):
            raise ValueError(f"theta must lie in (-pi, pi], got {self.theta}")


def polar_from_xy(x: float, y: float) -> PolarCoord:
    """Ego-relative Cartesian (x right, y forward) to polar."""
    r = math.hypot(x, y)
    theta = wrap_angle(math.atan2(y, x) - 0.5 * math.pi)
    return PolarCoord(r, theta)


def xy_from_polar(p: PolarCoord) -> tuple[float, float]:
    """Polar back to ego-relative Cartesian (x right, y forward)."""
    return -p.r * math.sin(p.theta), p.r * math.cos(p.theta)


class OcclusionLevel(IntEnum):
    """Binned visible fraction of an object as seen from the ego."""

    VIS0 = 0  # [0.0, 0.4) visible
    VIS1 = 1  # [0.4, 0.6)
    VIS2 = 2  # [0.6, 0.8)
    VIS3 = 3  # [0.8, 1.0]

    @classmethod
    def from_fraction(cls, fraction: float) -> "OcclusionLevel":
        f = min(max(fraction, 0.0), 1.0)
        if f < 0.4:
            return cls.VIS0
        if f < 0.6:
            return cls.VIS1
        if f < 0.8:
            return cls.VIS2
        return cls.VIS3


N_OCCLUSION_LEVELS = 4


@dataclass(frozen=True, slots=True)
class GridSpec:
    """Polar partitioning of the ego surroundings.

    The angular width is stored in degrees so that model files round-trip
    bit-for-bit; use ``sector_width_rad`` for math.
    """

    sector_width_deg: float = 30.0
    ring_depth_m: float = 10.0
    max_radius_m: float = 100.0

    def __post_init__(self):
        if self.sector_width_deg <= 0 or self.ring_depth_m <= 0 or self.max_radius_m <= 0:
            raise ValueError("grid dimensions must be positive")
        ns = 360.0 / self.sector_width_deg
        if abs(ns - round(ns)) > 1e-9 or round(ns) < 1:
            raise ValueError(f"sector_width_deg must divide 360 evenly, got {self.sector_width_deg}")
        nr = self.max_radius_m / self.ring_depth_m
        if abs(nr - round(nr)) > 1e-9 or round(nr) < 1:
            raise ValueError(
                f"max_radius_m must be an integer multiple of ring_depth_m, got {self.max_radius_m}/{self.ring_depth_m}"
            )

    @property
    def n_sectors(self) -> int:
        return round(360.0 / self.sector_width_deg)

    @property
    def n_rings(self) -> int:
        return round(self.max_radius_m / self.ring_depth_m)

    @property
    def sector_width_rad(self) -> float:
        return math.radians(self.sector_width_deg)

    @property
    def n_conditions(self) -> int:
        return N_OCCLUSION_LEVELS * self.n_rings * self.n_sectors


@dataclass(frozen=True, slots=True)
class Condition:
    """One model partition: an (occlusion level, ring, sector) cell.

    ``index`` is occlusion-major: occ * (n_rings * n_sectors) + ring * n_sectors
    + sector, which fixes the on-disk ordering of model files.
    """

    index: int
    occ: int
    ring: int
    sector: int


def sector_of(theta: float, grid: GridSpec) -> int:
    """Sector index for a bearing; sector 0 starts at the ego heading and counts counterclockwise."""
    tw = theta % TWO_PI
    idx = int(tw // grid.sector_width_rad)
    return min(idx, grid.n_sectors - 1)  # guard against float edge at 2*pi


def condition_index(occ: int, ring: int, sector: int, grid: GridSpec) -> int:
    return occ * (grid.n_rings * grid.n_sectors) + ring * grid.n_sectors + sector


def condition_from_index(index: int, grid: GridSpec) -> Condition:
    """Inverse of the occlusion-major indexing."""
    per_occ = grid.n_rings * grid.n_sectors
    if not (0 <= index < N_OCCLUSION_LEVELS * per_occ):
        raise ValueError(f"condition index {index} out of range for grid")
    occ, rest = divmod(index, per_occ)
    ring, sector = divmod(rest, grid.n_sectors)
    return Condition(index, occ, ring, sector)


def condition_of(position: PolarCoord, occlusion: OcclusionLevel, grid: GridSpec) -> Condition | None:
    """Resolve the condition containing a position, or None when r >= max_radius.

    The outer boundary is exclusive: an object exactly at max_radius is
    outside the grid.
    """
    if position.r >= grid.max_radius_m:
        return None
    ring = min(int(position.r // grid.ring_depth_m), grid.n_rings - 1)
    sector = sector_of(position.theta, grid)
    occ = int(occlusion)
    return Condition(condition_index(occ, ring, sector, grid), occ, ring, sector)
