"""Robot motion, nozzle section control and herbicide accounting.

The boom carries individually valved fan nozzles spread across the working
width. For each plant the covering nozzles open a fixed lead distance ahead
of the leading edge and close a lag distance behind the trailing edge, so
at the standard detect speed a 100 mm plant costs one nozzle 0.28 s of open
time. Overlapping windows on the same nozzle are coalesced, and the tank is
debited by the marginal open time so volume conservation is exact.
"""
from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (EmptyTankAtStart, InconsistentGeometry, NegativeTime,
                     PlantOutsideBoom, UnsupportedHardware)
from .geo import LocalPoint
from .route import Tour

SUPPORTED_NOZZLE_COUNTS = (6, 11, 16)


@dataclass(frozen=True)
class BoomConfig:
    """Sprayer boom geometry and hydraulics.

    Nozzle pitch is derived as working_width / nozzle_count; the spray width
    of an individual nozzle is an independent parameter, so gaps (spray
    width below pitch) raise an InconsistentGeometry warning rather than an
    error.
    """

    nozzle_count: int = 16
    working_width_m: float = 1.8
    nozzle_spray_width_m: float = 0.15
    nozzle_overlap_m: float = 0.01
    working_height_m: float = 0.25
    flow_ml_per_s: float = 15.0
    pressure_bar: float = 3.0
    lead_m: float = 0.02
    lag_m: float = 0.02
    valve_latency_s: float = 0.0

    def __post_init__(self):
        if self.nozzle_count < 1:
            raise ValueError("nozzle_count must be >= 1")
        if self.nozzle_count not in SUPPORTED_NOZZLE_COUNTS:
            warnings.warn(
                f"{self.nozzle_count} nozzles is not a standard build "
                f"(main bar 6, one arm 11, both arms 16)", UnsupportedHardware,
                stacklevel=2)
        for name in ("working_width_m", "nozzle_spray_width_m",
                     "working_height_m", "flow_ml_per_s", "pressure_bar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lead_m < 0 or self.lag_m < 0 or self.valve_latency_s < 0:
            raise ValueError("lead, lag and valve latency must be >= 0")

    @property
    def pitch_m(self) -> float:
        return self.working_width_m / self.nozzle_count

    @classmethod
    def main_bar(cls, **kw) -> "BoomConfig":
        """Six-nozzle main bar, 550 mm working width."""
        return cls(nozzle_count=6, working_width_m=0.55, **kw)

    @classmethod
    def one_arm(cls, **kw) -> "BoomConfig":
        """Main bar plus one five-nozzle arm, 1175 mm working width."""
        return cls(nozzle_count=11, working_width_m=1.175, **kw)

    @classmethod
    def full_boom(cls, **kw) -> "BoomConfig":
        """Main bar plus both arms: 16 nozzles over 1800 mm."""
        return cls(nozzle_count=16, working_width_m=1.8, **kw)


def boom_layout(cfg: BoomConfig) -> list[tuple[float, float]]:
    """Per-nozzle lateral coverage intervals, centered on the robot axis.

    Nozzle i covers [center - spray_width/2, center + spray_width/2] with
    centers at pitch = working_width / nozzle_count.
    """
    pitch = cfg.pitch_m
    if cfg.nozzle_spray_width_m < pitch - 1e-12:
        warnings.warn(
            f"spray width {cfg.nozzle_spray_width_m * 1000:.0f} mm below nozzle "
            f"pitch {pitch * 1000:.1f} mm leaves coverage gaps",
            InconsistentGeometry, stacklevel=2)
    half = cfg.nozzle_spray_width_m / 2.0
    first = -cfg.working_width_m / 2.0 + pitch / 2.0
    return [(first + i * pitch - half, first + i * pitch + half)
            for i in range(cfg.nozzle_count)]


def nozzle_centers(cfg: BoomConfig) -> list[float]:
    pitch = cfg.pitch_m
    first = -cfg.working_width_m / 2.0 + pitch / 2.0
    return [first + i * pitch for i in range(cfg.nozzle_count)]


def assign_nozzles(layout: list[tuple[float, float]], offset_m: float,
                   diameter_m: float) -> list[int]:
    """Nozzles whose coverage interval intersects the plant span.

    Raises PlantOutsideBoom when no interval intersects; callers treat that
    as an alignment failure and count the plant as missed.
    """
    lo = offset_m - diameter_m / 2.0
    hi = offset_m + diameter_m / 2.0
    hit = [i for i, (a, b) in enumerate(layout) if a <= hi and b >= lo]
    if not hit:
        raise PlantOutsideBoom(
            f"plant at lateral offset {offset_m:.3f} m misses all nozzles")
    return hit


@dataclass(frozen=True)
class PassPlant:
    """A verified plant in pass-local coordinates (along >= 0 is ahead)."""

    along_m: float
    across_m: float
    diameter_m: float
    plant_id: int


@dataclass(frozen=True)
class ValveEvent:
    nozzle_id: int
    t_open_s: float
    t_close_s: float
    plant_id: int


@dataclass(frozen=True)
class ValveSchedule:
    events: tuple[ValveEvent, ...]

    @property
    def total_open_time_s(self) -> float:
        return sum(e.t_close_s - e.t_open_s for e in self.events)


class _NozzleTimeline:
    """Sorted disjoint open windows for one nozzle with marginal accounting."""

    def __init__(self):
        self.starts: list[float] = []
        self.windows: list[list] = []  # [t0, t1, plant_id]

    def added_duration(self, t0: float, t1: float) -> float:
        """Open time the window would add after coalescing; no mutation."""
        covered = 0.0
        i = bisect.bisect_left(self.starts, t0)
        if i > 0 and self.windows[i - 1][1] >= t0:
            i -= 1
        while i < len(self.windows) and self.windows[i][0] <= t1:
            a, b, _ = self.windows[i]
            covered += max(0.0, min(b, t1) - max(a, t0))
            i += 1
        return (t1 - t0) - covered

    def insert(self, t0: float, t1: float, plant_id: int) -> float:
        added = self.added_duration(t0, t1)
        i = bisect.bisect_left(self.starts, t0)
        if i > 0 and self.windows[i - 1][1] >= t0:
            i -= 1
        j = i
        new_a, new_b, pid = t0, t1, plant_id
        while j < len(self.windows) and self.windows[j][0] <= t1:
            a, b, existing_pid = self.windows[j]
            if a < new_a:
                new_a, pid = a, existing_pid  # attribute to earliest opener
            new_b = max(new_b, b)
            j += 1
        self.windows[i:j] = [[new_a, new_b, pid]]
        self.starts[i:j] = [new_a]
        return added


def schedule_spray(plants: list[PassPlant], speed_mps: float, cfg: BoomConfig,
                   t0_s: float = 0.0,
                   layout: list[tuple[float, float]] | None = None) -> ValveSchedule:
    """Per-nozzle open/close windows for one straight pass.

    The window for a plant opens a lead distance before its leading edge
    and closes a lag distance after its trailing edge; valve latency shifts
    both commands earlier. Open commands are clamped to the pass start, and
    overlapping windows on the same nozzle coalesce into one event
    (attributed to the earliest-opening plant).
    """
    if speed_mps <= 0:
        raise ValueError("pass speed must be positive")
    if layout is None:
        layout = boom_layout(cfg)
    timelines: dict[int, _NozzleTimeline] = {}
    for p in plants:
        if p.along_m < 0:
            raise NegativeTime(
                f"plant {p.plant_id} lies {-p.along_m:.3f} m behind the pass start")
        nozzles = assign_nozzles(layout, p.across_m, p.diameter_m)
        t_open = t0_s + max(
            0.0, (p.along_m - p.diameter_m / 2.0 - cfg.lead_m) / speed_mps
            - cfg.valve_latency_s)
        t_close = t0_s + (p.along_m + p.diameter_m / 2.0 + cfg.lag_m) / speed_mps \
            - cfg.valve_latency_s
        for nz in nozzles:
            timelines.setdefault(nz, _NozzleTimeline()).insert(t_open, t_close, p.plant_id)
    return _schedule_from_timelines(timelines)


def _schedule_from_timelines(timelines: dict[int, "_NozzleTimeline"]) -> ValveSchedule:
    events = [ValveEvent(nz, a, b, pid)
              for nz in sorted(timelines)
              for a, b, pid in timelines[nz].windows]
    events.sort(key=lambda e: (e.t_open_s, e.nozzle_id))
    return ValveSchedule(events=tuple(events))


def volume_used(schedule: ValveSchedule, cfg: BoomConfig) -> float:
    """Liters dispensed over all valve events."""
    return schedule.total_open_time_s * cfg.flow_ml_per_s / 1000.0


def max_speed_for_dose(required_dose_ml: float, plant_diameter_m: float,
                       cfg: BoomConfig, speed_cap_mps: float = 0.5) -> float:
    """Fastest pass speed that still deposits the required single-nozzle dose.

    v = flow * (diameter + lead + lag) / dose, capped at the detect speed.
    """
    if required_dose_ml <= 0:
        raise ValueError("dose must be positive")
    v = cfg.flow_ml_per_s * (plant_diameter_m + cfg.lead_m + cfg.lag_m) / required_dose_ml
    return min(v, speed_cap_mps)


@dataclass(frozen=True)
class VerifyModel:
    """Close-range verification as a Bernoulli hit/miss with lateral noise."""

    verify_prob: float = 1.0
    false_spray_prob: float = 0.0
    relocalization_sigma_m: float = 0.02

    def __post_init__(self):
        if not (0.0 <= self.verify_prob <= 1.0 and 0.0 <= self.false_spray_prob <= 1.0):
            raise ValueError("probabilities must be in [0, 1]")
        if self.relocalization_sigma_m < 0:
            raise ValueError("relocalization sigma must be >= 0")


@dataclass(frozen=True)
class DriveProfile:
    """Motion parameters of the robot between and over targets.

    ``alignment`` picks the lateral strategy of the spray pass: "nozzle"
    shifts the robot (at most half a pitch) so the nearest nozzle line runs
    over the plant; "axis" keeps the plant on the boom centerline.
    """

    transit_speed_mps: float = 2.0
    detect_speed_mps: float = 0.5
    slow_radius_m: float = 2.0
    pass_margin_m: float = 0.5
    alignment: str = "nozzle"

    def __post_init__(self):
        if self.transit_speed_mps <= 0 or self.detect_speed_mps <= 0:
            raise ValueError("speeds must be positive")
        if self.slow_radius_m < 0 or self.pass_margin_m <= 0:
            raise ValueError("slow radius must be >= 0 and pass margin > 0")
        if self.alignment not in ("nozzle", "axis"):
            raise ValueError("alignment must be 'nozzle' or 'axis'")


@dataclass(frozen=True)
class SprayTarget:
    """A route target as the robot sees it; empty plant_ids marks a ghost."""

    target_id: int
    position: LocalPoint
    diameter_m: float = 0.10
    plant_ids: tuple[int, ...] = ()

    @property
    def is_real(self) -> bool:
        return len(self.plant_ids) > 0


TRANSIT = "TRANSIT"
APPROACH = "APPROACH"
SPRAY_PASS = "SPRAY_PASS"


@dataclass(frozen=True)
class RobotSegment:
    p_from: LocalPoint
    p_to: LocalPoint
    speed_mps: float
    t_start_s: float
    t_end_s: float
    mode: str


@dataclass(frozen=True)
class RobotTimeline:
    segments: tuple[RobotSegment, ...]

    @property
    def duration_s(self) -> float:
        if not self.segments:
            return 0.0
        return self.segments[-1].t_end_s - self.segments[0].t_start_s

    @property
    def distance_m(self) -> float:
        return sum(s.p_from.distance_to(s.p_to) for s in self.segments)


@dataclass(frozen=True)
class SprayReport:
    volume_used_l: float
    plants_sprayed: int
    plants_missed: int
    false_sprays: int
    tank_remaining_l: float
    volume_by_nozzle: dict[int, float] = field(default_factory=dict)
    outcomes: tuple[tuple[int, str, float], ...] = ()   # (target_id, outcome, t_s)


def _rng(seed) -> np.random.Generator:
    parts = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    return np.random.default_rng(parts)


def plan_robot_mission(tour: Tour, targets: list[SprayTarget],
                       verify_model: VerifyModel, cfg: BoomConfig, seed,
                       profile: DriveProfile | None = None,
                       tank_capacity_l: float = 24.0,
                       t0_s: float = 0.0,
                       abort_at_s: float | None = None,
                       ) -> tuple[RobotTimeline, ValveSchedule, SprayReport]:
    """Drive the tour, verify each target at close range, and spray.

    Motion: transit at the fast speed, slowing inside the slow radius, then
    a straight spray pass aligned with the incoming leg that runs from one
    pass margin before the target to one margin past it. Verification and
    lateral re-localization noise decide the outcome per target; spraying
    stops (driving continues) once the tank cannot cover a plant's marginal
    volume. An operator abort truncates the whole mission at the given time.
    """
    if profile is None:
        profile = DriveProfile()
    if tank_capacity_l <= 0:
        raise EmptyTankAtStart(f"tank capacity {tank_capacity_l} L")
    rng = _rng(seed)
    layout = boom_layout(cfg)
    centers = nozzle_centers(cfg)
    mid = (np.abs(np.array(centers))).argmin() if centers else 0
    center_pick = centers[int(mid)] if centers else 0.0

    segments: list[RobotSegment] = []
    timelines: dict[int, _NozzleTimeline] = {}
    outcomes: list[tuple[int, str, float]] = []
    tank = tank_capacity_l
    sprayed = missed = false_sprays = 0
    tank_blocked = False

    cur = np.array(tour.start.xy, dtype=float)
    prev_dir = np.array([1.0, 0.0])
    t = t0_s

    def add_segment(p0: np.ndarray, p1: np.ndarray, speed: float, mode: str) -> None:
        nonlocal t
        dist = float(np.linalg.norm(p1 - p0))
        if dist < 1e-12:
            return
        t_end = t + dist / speed
        segments.append(RobotSegment(
            p_from=LocalPoint(float(p0[0]), float(p0[1])),
            p_to=LocalPoint(float(p1[0]), float(p1[1])),
            speed_mps=speed, t_start_s=t, t_end_s=t_end, mode=mode))
        t = t_end

    aborted_from: int | None = None
    for visit, ti in enumerate(tour.order):
        tgt = targets[ti]
        txy = np.array(tgt.position.xy, dtype=float)
        vec = txy - cur
        dist = float(np.linalg.norm(vec))
        dirv = vec / dist if dist > 1e-12 else prev_dir

        slow_zone = max(profile.slow_radius_m, profile.pass_margin_m)
        transit_len = max(dist - slow_zone, 0.0)
        pass_in = min(profile.pass_margin_m, dist)
        approach_len = max(dist - transit_len - pass_in, 0.0)

        p_transit_end = cur + dirv * transit_len
        p_pass_start = cur + dirv * (transit_len + approach_len)
        p_pass_end = txy + dirv * profile.pass_margin_m

        add_segment(cur, p_transit_end, profile.transit_speed_mps, TRANSIT)
        add_segment(p_transit_end, p_pass_start, profile.detect_speed_mps, APPROACH)
        pass_t0 = t
        add_segment(p_pass_start, p_pass_end, profile.detect_speed_mps, SPRAY_PASS)
        cur = p_pass_end
        prev_dir = dirv

        if abort_at_s is not None and t > abort_at_s:
            aborted_from = visit
            break

        u = float(rng.random())
        lateral_noise = float(rng.normal(0.0, verify_model.relocalization_sigma_m)) \
            if verify_model.relocalization_sigma_m > 0 else 0.0

        if tgt.is_real:
            go = u < verify_model.verify_prob
            miss_kind = "missed_verification"
        else:
            go = u < verify_model.false_spray_prob
            miss_kind = "skipped_ghost"
        if not go:
            outcomes.append((tgt.target_id, miss_kind, t))
            if tgt.is_real:
                missed += 1
            continue

        across = (center_pick if profile.alignment == "nozzle" else 0.0) + lateral_noise
        try:
            nozzles = assign_nozzles(layout, across, tgt.diameter_m)
        except PlantOutsideBoom:
            outcomes.append((tgt.target_id, "missed_alignment", t))
            if tgt.is_real:
                missed += 1
            continue

        v = profile.detect_speed_mps
        t_open = pass_t0 + max(
            0.0, (pass_in - tgt.diameter_m / 2.0 - cfg.lead_m) / v - cfg.valve_latency_s)
        t_close = pass_t0 + (pass_in + tgt.diameter_m / 2.0 + cfg.lag_m) / v \
            - cfg.valve_latency_s
        needed = sum(
            timelines.setdefault(nz, _NozzleTimeline()).added_duration(t_open, t_close)
            for nz in nozzles) * cfg.flow_ml_per_s / 1000.0
        if tank_blocked or needed > tank + 1e-12:
            tank_blocked = True
            if tgt.is_real:
                outcomes.append((tgt.target_id, "missed_tank", t))
                missed += 1
            else:
                outcomes.append((tgt.target_id, "skipped_ghost", t))
            continue
        for nz in nozzles:
            timelines[nz].insert(t_open, t_close, tgt.target_id)
        tank -= needed
        if tgt.is_real:
            outcomes.append((tgt.target_id, "sprayed", t))
            sprayed += 1
        else:
            outcomes.append((tgt.target_id, "false_spray", t))
            false_sprays += 1

    if aborted_from is not None:
        segments = _truncate_segments(segments, abort_at_s)
        for ti in tour.order[aborted_from:]:
            outcomes.append((targets[ti].target_id, "aborted", float(abort_at_s)))
            if targets[ti].is_real:
                missed += 1

    schedule = _schedule_from_timelines(timelines)
    by_nozzle = {}
    for e in schedule.events:
        by_nozzle[e.nozzle_id] = by_nozzle.get(e.nozzle_id, 0.0) + \
            (e.t_close_s - e.t_open_s) * cfg.flow_ml_per_s / 1000.0
    report = SprayReport(
        volume_used_l=tank_capacity_l - tank,
        plants_sprayed=sprayed,
        plants_missed=missed,
        false_sprays=false_sprays,
        tank_remaining_l=tank,
        volume_by_nozzle=by_nozzle,
        outcomes=tuple(outcomes),
    )
    return RobotTimeline(segments=tuple(segments)), schedule, report


def _truncate_segments(segments: list[RobotSegment],
                       abort_at_s: float) -> list[RobotSegment]:
    out: list[RobotSegment] = []
    for s in segments:
        if s.t_end_s <= abort_at_s:
            out.append(s)
        elif s.t_start_s < abort_at_s:
            frac = (abort_at_s - s.t_start_s) / (s.t_end_s - s.t_start_s)
            p = LocalPoint(
                s.p_from.east_m + (s.p_to.east_m - s.p_from.east_m) * frac,
                s.p_from.north_m + (s.p_to.north_m - s.p_from.north_m) * frac)
            out.append(RobotSegment(s.p_from, p, s.speed_mps,
                                    s.t_start_s, abort_at_s, s.mode))
            break
        else:
            break
    return out
