"""Coordinate frames and image-to-ground georeferencing.

COORDINATE CONVENTIONS
======================
World frame ("local"):
  - East-north tangent plane in meters, anchored at a per-scenario origin.
  - Equirectangular projection: fields are well under 1 km across, so the
    projection error is sub-centimeter; validity is enforced at 10 km.

Image frame:
  - Origin top-left, x to the right, y down, units pixels.
  - The top edge of the frame points along the flight heading, i.e. image
    "up" is the direction of travel and image "right" is 90 degrees
    clockwise from it.

Heading:
  - Degrees clockwise from true north, in [0, 360).

The camera is treated as a nadir pinhole with square pixels; the ground
sample distance (GSD) scales linearly with altitude above ground.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfValidityRange, PixelOutOfBounds

R_EARTH_M = 6_371_000.0            # mean Earth radius, meters
VALIDITY_RANGE_M = 10_000.0        # projection validity bound, meters
_M_PER_DEG_LAT = R_EARTH_M * math.pi / 180.0


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 position in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not (-180.0 <= self.lon_deg <= 180.0):
            raise ValueError(f"longitude {self.lon_deg} outside [-180, 180]")


@dataclass(frozen=True)
class LocalPoint:
    """East-north offset in meters relative to the scenario origin."""

    east_m: float
    north_m: float

    def __post_init__(self):
        if not (math.isfinite(self.east_m) and math.isfinite(self.north_m)):
            raise ValueError("local coordinates must be finite")
        if abs(self.east_m) >= VALIDITY_RANGE_M or abs(self.north_m) >= VALIDITY_RANGE_M:
            raise OutOfValidityRange(
                f"({self.east_m}, {self.north_m}) beyond {VALIDITY_RANGE_M} m validity bound"
            )

    @property
    def xy(self) -> tuple[float, float]:
        return (self.east_m, self.north_m)

    def distance_to(self, other: "LocalPoint") -> float:
        return math.hypot(self.east_m - other.east_m, self.north_m - other.north_m)


@dataclass(frozen=True)
class Pose:
    """UAV position and attitude used for georeferencing a nadir image."""

    position: GeoPoint
    altitude_agl_m: float
    heading_deg: float

    def __post_init__(self):
        if not (0.0 <= self.heading_deg < 360.0):
            object.__setattr__(self, "heading_deg", self.heading_deg % 360.0)


@dataclass(frozen=True)
class CameraModel:
    """Nadir pinhole camera; GSD is referenced at one altitude and scales linearly."""

    width_px: int
    height_px: int
    gsd_m_per_px_at_ref: float
    ref_altitude_m: float

    def __post_init__(self):
        if min(self.width_px, self.height_px) <= 0:
            raise ValueError("pixel counts must be positive")
        if self.gsd_m_per_px_at_ref <= 0 or self.ref_altitude_m <= 0:
            raise ValueError("GSD and reference altitude must be positive")

    def gsd_at(self, altitude_agl_m: float) -> float:
        """Ground sample distance (m/px) at the given altitude."""
        if altitude_agl_m <= 0:
            raise ValueError("altitude must be positive for projection")
        return self.gsd_m_per_px_at_ref * altitude_agl_m / self.ref_altitude_m

    def footprint_size(self, altitude_agl_m: float) -> tuple[float, float]:
        """(cross-track, along-track) ground extent of one image, meters."""
        gsd = self.gsd_at(altitude_agl_m)
        return (self.width_px * gsd, self.height_px * gsd)


# 12.3 MP-class nadir detection camera. The GSD at the 10 m survey altitude
# is pinned so that, with 10% overlap, captures at 3 m/s recur every 0.82 s
# and adjacent tracks sit 3.93 m apart.
DEFAULT_CAMERA = CameraModel(
    width_px=4433,
    height_px=2775,
    gsd_m_per_px_at_ref=2.46 / (0.9 * 2775),
    ref_altitude_m=10.0,
)


def _check_range(east_m: float, north_m: float) -> None:
    if math.hypot(east_m, north_m) > VALIDITY_RANGE_M:
        raise OutOfValidityRange(
            f"separation {math.hypot(east_m, north_m):.0f} m exceeds "
            f"{VALIDITY_RANGE_M:.0f} m validity bound"
        )


def wgs84_to_enu(origin: GeoPoint, p: GeoPoint) -> LocalPoint:
    """Project a WGS84 point into the east-north plane anchored at ``origin``.

    Equirectangular tangent-plane projection:
      north = (lat_p - lat_o) * R * pi/180
      east  = (lon_p - lon_o) * R * cos(lat_o) * pi/180

    Raises OutOfValidityRange when the two points are more than 10 km apart.
    """
    north = (p.lat_deg - origin.lat_deg) * _M_PER_DEG_LAT
    east = (p.lon_deg - origin.lon_deg) * _M_PER_DEG_LAT * math.cos(math.radians(origin.lat_deg))
    _check_range(east, north)
    return LocalPoint(east, north)


def enu_to_wgs84(origin: GeoPoint, l: LocalPoint) -> GeoPoint:
    """Exact algebraic inverse of :func:`wgs84_to_enu`."""
    _check_range(l.east_m, l.north_m)
    lat = origin.lat_deg + l.north_m / _M_PER_DEG_LAT
    lon = origin.lon_deg + l.east_m / (_M_PER_DEG_LAT * math.cos(math.radians(origin.lat_deg)))
    return GeoPoint(lat, lon)


def _heading_axes(heading_deg: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Unit vectors (right, forward) of the image frame in east-north coords."""
    h = math.radians(heading_deg)
    forward = (math.sin(h), math.cos(h))
    right = (math.cos(h), -math.sin(h))  # 90 deg clockwise from forward
    return right, forward


def pixel_to_ground(origin: GeoPoint, pose: Pose, cam: CameraModel,
                    px: tuple[float, float]) -> LocalPoint:
    """Map an image pixel to its ground position in the local frame.

    The pixel offset from the image center is scaled by the GSD at the pose
    altitude, rotated by the heading (image up = direction of flight), and
    added to the pose position projected into the local frame.
    """
    x, y = px
    if not (0.0 <= x <= cam.width_px and 0.0 <= y <= cam.height_px):
        raise PixelOutOfBounds(f"pixel ({x}, {y}) outside {cam.width_px}x{cam.height_px} image")
    if pose.altitude_agl_m <= 0:
        raise ValueError("pose altitude must be positive for projection")
    gsd = cam.gsd_at(pose.altitude_agl_m)
    right_m = (x - cam.width_px / 2.0) * gsd
    forward_m = (cam.height_px / 2.0 - y) * gsd
    r, f = _heading_axes(pose.heading_deg)
    base = wgs84_to_enu(origin, pose.position)
    return LocalPoint(
        base.east_m + right_m * r[0] + forward_m * f[0],
        base.north_m + right_m * r[1] + forward_m * f[1],
    )


def ground_to_pixel(origin: GeoPoint, pose: Pose, cam: CameraModel,
                    point: LocalPoint) -> tuple[float, float]:
    """Inverse of :func:`pixel_to_ground`; may return coordinates outside the image."""
    if pose.altitude_agl_m <= 0:
        raise ValueError("pose altitude must be positive for projection")
    gsd = cam.gsd_at(pose.altitude_agl_m)
    base = wgs84_to_enu(origin, pose.position)
    de = point.east_m - base.east_m
    dn = point.north_m - base.north_m
    r, f = _heading_axes(pose.heading_deg)
    right_m = de * r[0] + dn * r[1]
    forward_m = de * f[0] + dn * f[1]
    return (cam.width_px / 2.0 + right_m / gsd, cam.height_px / 2.0 - forward_m / gsd)


def footprint(origin: GeoPoint, pose: Pose, cam: CameraModel) -> list[LocalPoint]:
    """Ground quadrilateral covered by one nadir image.

    Returns the four corners in counterclockwise order in the local frame,
    starting at the rear-right corner of the image.
    """
    if pose.altitude_agl_m <= 0:
        raise ValueError("pose altitude must be positive for projection")
    w_m, h_m = cam.footprint_size(pose.altitude_agl_m)
    r, f = _heading_axes(pose.heading_deg)
    base = wgs84_to_enu(origin, pose.position)
    corners = []
    # (right, forward) corner offsets in counterclockwise order; the heading
    # rotation preserves orientation, so the output stays counterclockwise.
    for cr, cf in ((w_m / 2, -h_m / 2), (w_m / 2, h_m / 2),
                   (-w_m / 2, h_m / 2), (-w_m / 2, -h_m / 2)):
        corners.append(LocalPoint(
            base.east_m + cr * r[0] + cf * f[0],
            base.north_m + cr * r[1] + cf * f[1],
        ))
    return corners
