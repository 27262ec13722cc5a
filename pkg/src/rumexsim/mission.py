"""Boustrophedon survey planning, capture scheduling and traffic estimates.

The planner lays parallel tracks across a field polygon, clips them to the
polygon boundary, and orders them serpentine fashion. Capture events are
spaced along each track so consecutive images overlap by a configurable
fraction; the survey estimate turns the schedule into duration and uplink
traffic figures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePolygon
from .geo import CameraModel, GeoPoint, LocalPoint, Pose, enu_to_wgs84

DEFAULT_IMAGE_SIZE_BITS = 192_000_000   # one uncompressed detection image
DEFAULT_FPV_RATE_BPS = 6_000_000        # H.264 1080p60 situational-awareness feed
DEFAULT_TURN_TIME_S = 3.0               # per-turn penalty between tracks


@dataclass(frozen=True)
class FieldPolygon:
    """Simple polygon in the local frame; vertices are normalized counterclockwise."""

    vertices: tuple[LocalPoint, ...]

    def __init__(self, vertices):
        pts = tuple(vertices)
        if len(pts) < 3:
            raise DegeneratePolygon("polygon needs at least 3 vertices")
        xy = np.array([p.xy for p in pts], dtype=float)
        area2 = _signed_area2(xy)
        if abs(area2) < 1e-12:
            raise DegeneratePolygon("polygon area is zero")
        if area2 < 0:
            pts = tuple(reversed(pts))
            xy = xy[::-1]
        if not _is_simple(xy):
            raise DegeneratePolygon("polygon is self-intersecting")
        object.__setattr__(self, "vertices", pts)

    @property
    def xy(self) -> np.ndarray:
        return np.array([p.xy for p in self.vertices], dtype=float)

    @property
    def area_m2(self) -> float:
        return 0.5 * _signed_area2(self.xy)

    def bounds(self) -> tuple[float, float, float, float]:
        xy = self.xy
        return (xy[:, 0].min(), xy[:, 1].min(), xy[:, 0].max(), xy[:, 1].max())

    def contains(self, east_m: float, north_m: float) -> bool:
        """Even-odd ray cast; boundary points count as inside."""
        xy = self.xy
        x, y = east_m, north_m
        inside = False
        n = len(xy)
        for i in range(n):
            x1, y1 = xy[i]
            x2, y2 = xy[(i + 1) % n]
            if (y1 > y) != (y2 > y):
                xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x < xi:
                    inside = not inside
                elif abs(x - xi) < 1e-12:
                    return True
        return inside


def _signed_area2(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection of open segments (shared endpoints don't count)."""
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _cross(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _is_simple(xy: np.ndarray) -> bool:
    """Quadratic segment-intersection scan over non-adjacent edge pairs."""
    n = len(xy)
    edges = [(xy[i], xy[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(edges[i][0], edges[i][1], edges[j][0], edges[j][1]):
                return False
    return True


@dataclass(frozen=True)
class Track:
    """One straight survey segment, flown start to end."""

    start: LocalPoint
    end: LocalPoint
    heading_deg: float

    @property
    def length_m(self) -> float:
        return self.start.distance_to(self.end)


@dataclass(frozen=True)
class SurveyPlan:
    tracks: tuple[Track, ...]
    altitude_agl_m: float
    speed_mps: float
    track_spacing_m: float
    sweep_heading_deg: float
    turn_time_s: float = DEFAULT_TURN_TIME_S

    @property
    def total_track_length_m(self) -> float:
        return sum(t.length_m for t in self.tracks)

    def flight_duration_s(self) -> float:
        """Time on tracks plus one turn penalty per track change."""
        if not self.tracks:
            return 0.0
        return self.total_track_length_m / self.speed_mps + \
            self.turn_time_s * (len(self.tracks) - 1)


@dataclass(frozen=True)
class CaptureEvent:
    time_s: float
    pose: Pose
    image_id: int


@dataclass(frozen=True)
class SurveyEstimate:
    total_path_m: float
    duration_s: float
    image_count: int
    data_volume_bits: float
    mean_capture_rate_bps: float
    fpv_rate_bps: float


def _clip_line_to_polygon(xy: np.ndarray, anchor: np.ndarray,
                          direction: np.ndarray) -> list[tuple[float, float]]:
    """Parameter intervals t where ``anchor + t*direction`` is inside the polygon.

    Even-odd pairing of edge crossings; edges parallel to the line are
    skipped and the half-open edge convention avoids double counting at
    vertices. A grazing vertex can still leave an odd crossing count, in
    which case the line is nudged sideways by a nanometer and retried.
    """
    for nudge in (0.0, 1e-9, -1e-9):
        perp = np.array([direction[1], -direction[0]])
        a = anchor + perp * nudge
        ts = []
        n = len(xy)
        for i in range(n):
            p, q = xy[i], xy[(i + 1) % n]
            e = q - p
            denom = direction[0] * e[1] - direction[1] * e[0]
            if abs(denom) < 1e-15:
                continue  # parallel edge
            w = p - a
            t = (w[0] * e[1] - w[1] * e[0]) / denom
            s = (w[0] * direction[1] - w[1] * direction[0]) / denom
            if 0.0 <= s < 1.0:
                ts.append(t)
        if len(ts) % 2 == 0:
            ts.sort()
            out = []
            for k in range(0, len(ts), 2):
                if ts[k + 1] - ts[k] > 1e-9:
                    out.append((ts[k], ts[k + 1]))
            return out
    raise DegeneratePolygon("could not clip track line against polygon")


def plan_coverage(field_poly: FieldPolygon, spacing_m: float,
                  altitude_m: float = 10.0, speed_mps: float = 3.0,
                  sweep_heading_deg: float = 0.0,
                  turn_time_s: float = DEFAULT_TURN_TIME_S) -> SurveyPlan:
    """Lay serpentine tracks along ``sweep_heading_deg`` across the polygon.

    The track count is ceil(perpendicular extent / spacing); tracks keep
    exactly ``spacing_m`` separation and the set is centered so the first
    and last lines stay inside the polygon (the boundary margin equals
    spacing/2 whenever the extent divides evenly). Concave polygons may
    split a line into several tracks.
    """
    if spacing_m <= 0:
        raise ValueError("spacing must be positive")
    if speed_mps <= 0:
        raise ValueError("speed must be positive")
    area = field_poly.area_m2
    if area < spacing_m * spacing_m:
        raise DegeneratePolygon(
            f"field area {area:.1f} m^2 below spacing^2 ({spacing_m ** 2:.1f} m^2)")

    h = math.radians(sweep_heading_deg % 360.0)
    d = np.array([math.sin(h), math.cos(h)])       # along-track unit vector
    perp = np.array([math.cos(h), -math.sin(h)])   # offset axis, 90 deg clockwise

    xy = field_poly.xy
    proj = xy @ perp
    extent = float(proj.max() - proj.min())
    if extent <= 0:
        raise DegeneratePolygon("polygon has no extent perpendicular to the sweep")

    n_lines = max(1, math.ceil(extent / spacing_m - 1e-12))
    margin = (extent - (n_lines - 1) * spacing_m) / 2.0

    tracks: list[Track] = []
    fwd_heading = sweep_heading_deg % 360.0
    rev_heading = (sweep_heading_deg + 180.0) % 360.0
    for k in range(n_lines):
        c = float(proj.min()) + margin + k * spacing_m
        intervals = _clip_line_to_polygon(xy, perp * c, d)
        reverse = k % 2 == 1
        if reverse:
            intervals = [(t1, t0) for (t0, t1) in reversed(intervals)]
        for t0, t1 in intervals:
            p0 = perp * c + d * t0
            p1 = perp * c + d * t1
            tracks.append(Track(
                start=LocalPoint(float(p0[0]), float(p0[1])),
                end=LocalPoint(float(p1[0]), float(p1[1])),
                heading_deg=rev_heading if reverse else fwd_heading,
            ))
    return SurveyPlan(
        tracks=tuple(tracks),
        altitude_agl_m=altitude_m,
        speed_mps=speed_mps,
        track_spacing_m=spacing_m,
        sweep_heading_deg=sweep_heading_deg % 360.0,
        turn_time_s=turn_time_s,
    )


def capture_schedule(plan: SurveyPlan, cam: CameraModel, overlap: float,
                     origin: GeoPoint) -> list[CaptureEvent]:
    """Capture positions along each track at stride = footprint * (1 - overlap).

    The first capture sits at the track start; a final capture is added at
    the track end when the stride does not land on it, so the footprint
    chain always covers the full track. Timestamps assume constant speed
    plus the plan's turn penalty between tracks.
    """
    if not (0.0 <= overlap < 1.0):
        raise ValueError("overlap must be in [0, 1)")
    along_footprint = cam.height_px * cam.gsd_at(plan.altitude_agl_m)
    stride = along_footprint * (1.0 - overlap)

    events: list[CaptureEvent] = []
    t = 0.0
    image_id = 0
    for i, track in enumerate(plan.tracks):
        length = track.length_m
        k = math.floor(length / stride + 1e-9)
        positions = [j * stride for j in range(k + 1)]
        if positions[-1] < length - 1e-9:
            positions.append(length)
        ex = (track.end.east_m - track.start.east_m) / length if length > 0 else 0.0
        ny = (track.end.north_m - track.start.north_m) / length if length > 0 else 0.0
        for along in positions:
            pt = LocalPoint(track.start.east_m + ex * along,
                            track.start.north_m + ny * along)
            pose = Pose(position=enu_to_wgs84(origin, pt),
                        altitude_agl_m=plan.altitude_agl_m,
                        heading_deg=track.heading_deg)
            events.append(CaptureEvent(time_s=t + along / plan.speed_mps,
                                       pose=pose, image_id=image_id))
            image_id += 1
        t += length / plan.speed_mps
        if i < len(plan.tracks) - 1:
            t += plan.turn_time_s
    return events


def survey_estimate(plan: SurveyPlan, schedule: list[CaptureEvent],
                    image_size_bits: float = DEFAULT_IMAGE_SIZE_BITS,
                    fpv_rate_bps: float = DEFAULT_FPV_RATE_BPS) -> SurveyEstimate:
    """Duration, image count, data volume and capture-rate summary.

    The capture interval is the median of consecutive capture gaps, which
    ignores the shorter end-of-track gap and the turn pauses.
    """
    duration = plan.flight_duration_s()
    count = len(schedule)
    volume = count * image_size_bits
    if count >= 2:
        gaps = np.diff([e.time_s for e in schedule])
        gaps = gaps[gaps > 1e-12]
        interval = float(np.median(gaps)) if gaps.size else math.inf
    else:
        interval = math.inf
    rate = image_size_bits / interval if math.isfinite(interval) else 0.0
    return SurveyEstimate(
        total_path_m=plan.total_track_length_m,
        duration_s=duration,
        image_count=count,
        data_volume_bits=volume,
        mean_capture_rate_bps=rate,
        fpv_rate_bps=fpv_rate_bps,
    )
