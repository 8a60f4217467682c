"""Geodesy helpers: spherical distances, bearings and a local planar projection.

All road-network geometry runs on WGS-84 latitude/longitude pairs. Distances
use the haversine formula on a sphere of radius 6371000 m; city-scale work is
done on an equirectangular projection centered on the network, which agrees
with the sphere to well below a millimeter at that scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6371000.0


@dataclass(frozen=True)
class GeoPoint:
    """WGS-84 position. lat in [-90, 90], lon in [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon < 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")


def wrap_angle(x: float) -> float:
    """Wrap an angle in degrees to [-180, 180)."""
    return (x + 180.0) % 360.0 - 180.0


def wrap_bearing(x: float) -> float:
    """Wrap an angle in degrees to [0, 360)."""
    return x % 360.0


def geodesic_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points (haversine)."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle initial bearing from a to b, degrees in [0, 360).

    North is 0, east is 90. Raises ValueError for coincident points, where
    the bearing is undefined.
    """
    if a.lat == b.lat and a.lon == b.lon:
        raise ValueError("bearing undefined for coincident points")
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return wrap_bearing(math.degrees(math.atan2(y, x)))


class LocalProjection:
    """Equirectangular projection centered on a reference point.

    Good to sub-millimeter agreement with the sphere over a city-sized
    extract; used for spatial queries, interpolation and planar averaging.
    """

    def __init__(self, lat0: float, lon0: float):
        self.lat0 = lat0
        self.lon0 = lon0
        self._coslat = math.cos(math.radians(lat0))

    def to_xy(self, lat: float, lon: float) -> tuple[float, float]:
        x = math.radians(lon - self.lon0) * EARTH_RADIUS_M * self._coslat
        y = math.radians(lat - self.lat0) * EARTH_RADIUS_M
        return x, y

    def to_latlon(self, x: float, y: float) -> tuple[float, float]:
        lat = self.lat0 + math.degrees(y / EARTH_RADIUS_M)
        lon = self.lon0 + math.degrees(x / (EARTH_RADIUS_M * self._coslat))
        return lat, lon

    def planar_bearing(self, x0: float, y0: float, x1: float, y1: float) -> float:
        """Bearing of the planar segment (x0,y0)->(x1,y1), degrees in [0, 360)."""
        return wrap_bearing(math.degrees(math.atan2(x1 - x0, y1 - y0)))
