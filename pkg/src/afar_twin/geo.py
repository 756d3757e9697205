"""Geodetic <-> local east-north-up conversion.

A spherical-earth equirectangular projection around a frame origin. It is
accurate to well under 0.1 % over a few kilometres, and its inverse is exact,
which keeps logs written in lat/lon lossless when read back into meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0
_M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0


@dataclass(frozen=True)
class GeoPosition:
    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self):
        for name in ("lat_deg", "lon_deg", "alt_m"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 <= self.lon_deg < 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")
        if not math.isfinite(self.alt_m):
            raise ValueError(f"altitude not finite: {self.alt_m}")


@dataclass(frozen=True)
class EnuPosition:
    east_m: float
    north_m: float
    up_m: float = 0.0

    def __post_init__(self):
        for name in ("east_m", "north_m", "up_m"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(math.isfinite(v) for v in (self.east_m, self.north_m, self.up_m)):
            raise ValueError(f"non-finite ENU position: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.east_m, self.north_m, self.up_m])

    @classmethod
    def from_array(cls, a) -> "EnuPosition":
        return cls(float(a[0]), float(a[1]), float(a[2]) if len(a) > 2 else 0.0)


@dataclass(frozen=True)
class LocalFrame:
    origin: GeoPosition

    @property
    def _cos_lat0(self) -> float:
        return math.cos(math.radians(self.origin.lat_deg))


def to_enu(frame: LocalFrame, p: GeoPosition) -> EnuPosition:
    o = frame.origin
    east = (p.lon_deg - o.lon_deg) * frame._cos_lat0 * _M_PER_DEG
    north = (p.lat_deg - o.lat_deg) * _M_PER_DEG
    return EnuPosition(east, north, p.alt_m - o.alt_m)


def to_geo(frame: LocalFrame, p: EnuPosition) -> GeoPosition:
    o = frame.origin
    lat = o.lat_deg + p.north_m / _M_PER_DEG
    lon = o.lon_deg + p.east_m / (frame._cos_lat0 * _M_PER_DEG)
    return GeoPosition(lat, lon, o.alt_m + p.up_m)


def enu_arrays(frame: LocalFrame, lat, lon, alt) -> np.ndarray:
    """Vectorised `to_enu`; returns an (n, 3) array."""
    o = frame.origin
    lat, lon, alt = (np.asarray(v, dtype=float) for v in (lat, lon, alt))
    east = (lon - o.lon_deg) * frame._cos_lat0 * _M_PER_DEG
    north = (lat - o.lat_deg) * _M_PER_DEG
    return np.stack([east, north, alt - o.alt_m], axis=-1)


def geo_arrays(frame: LocalFrame, enu) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised `to_geo`; takes an (n, 3) array, returns (lat, lon, alt)."""
    o = frame.origin
    enu = np.asarray(enu, dtype=float)
    lat = o.lat_deg + enu[..., 1] / _M_PER_DEG
    lon = o.lon_deg + enu[..., 0] / (frame._cos_lat0 * _M_PER_DEG)
    return lat, lon, o.alt_m + enu[..., 2]


def distance_3d(a: EnuPosition, b: EnuPosition) -> float:
    return math.sqrt((a.east_m - b.east_m) ** 2 + (a.north_m - b.north_m) ** 2
                     + (a.up_m - b.up_m) ** 2)


def ground_distance(a: EnuPosition, b: EnuPosition) -> float:
    return math.hypot(a.east_m - b.east_m, a.north_m - b.north_m)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in a local frame (meters)."""
    east_min: float
    north_min: float
    east_max: float
    north_max: float

    def __post_init__(self):
        if not (self.east_max > self.east_min and self.north_max > self.north_min):
            raise ValueError(f"degenerate rectangle: {self}")

    @property
    def width(self) -> float:
        return self.east_max - self.east_min

    @property
    def height(self) -> float:
        return self.north_max - self.north_min

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.east_min + self.east_max), 0.5 * (self.north_min + self.north_max))

    def contains(self, east: float, north: float) -> bool:
        return self.east_min <= east <= self.east_max and self.north_min <= north <= self.north_max
