"""End-to-end scenario orchestration on a shared simulated clock.

A scenario bundles every sub-config; running it executes survey planning,
ground-truth synthesis, detection simulation, filtering, merging, route
optimisation, the robot spray mission and the uplink check in sequence.
Everything is driven by the scenario seed, so an identical scenario yields
a byte-identical serialized report. The event log assembled along the way
is the audit trail behind every report figure.
"""
from __future__ import annotations

import dataclasses
import json
from contextlib import contextmanager
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as fieldmod
from . import mission, netsim, route, sprayer
from .errors import ScenarioValidationError, SimulationError, StageError, UnknownParameter
from .geo import CameraModel, DEFAULT_CAMERA, GeoPoint, LocalPoint
from .mission import FieldPolygon

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PlantModel:
    """Ground-truth population; explicit positions override random placement."""

    density_per_ha: float = 300.0
    diameter_mean_m: float = 0.10
    diameter_sigma_m: float = 0.02
    positions_m: tuple[tuple[float, float], ...] | None = None
    diameters_m: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SurveyParams:
    altitude_m: float = 10.0
    speed_mps: float = 3.0
    track_spacing_m: float = 3.93
    sweep_heading_deg: float = 0.0
    overlap_frac: float = 0.1
    turn_time_s: float = 3.0
    image_size_bits: float = 192_000_000.0
    fpv_rate_bps: float = 6_000_000.0


@dataclass(frozen=True)
class FilterParams:
    min_area_m2: float = 0.005          # 50 cm^2
    min_area_to_length_m: float = 0.04


@dataclass(frozen=True)
class MergeParams:
    radius_m: float = 0.3


@dataclass(frozen=True)
class RoutingParams:
    robot_start_m: tuple[float, float] = (0.0, 0.0)
    max_depth: int = 3
    time_budget_ms: float | None = None
    return_to_start: bool = False


@dataclass(frozen=True)
class RobotParams:
    transit_speed_mps: float = 2.0
    detect_speed_mps: float = 0.5
    slow_radius_m: float = 2.0
    pass_margin_m: float = 0.5
    alignment: str = "nozzle"
    tank_capacity_l: float = 24.0

    def drive_profile(self) -> sprayer.DriveProfile:
        return sprayer.DriveProfile(
            transit_speed_mps=self.transit_speed_mps,
            detect_speed_mps=self.detect_speed_mps,
            slow_radius_m=self.slow_radius_m,
            pass_margin_m=self.pass_margin_m,
            alignment=self.alignment,
        )


@dataclass(frozen=True)
class NetworkParams:
    preset_name: str = "private-5g-sa"
    robot_stream_mbps: float = 25.0     # assumed close-range camera stream
    robot_stream_count: int = 3         # one per sprayer bar
    tick_s: float = 0.01
    inference_s: float = 0.05
    camera_lookahead_m: float = 0.5


@dataclass(frozen=True)
class Scenario:
    seed: int = 0
    origin: GeoPoint = GeoPoint(49.0, 8.0)
    field_polygon: FieldPolygon = None  # type: ignore[assignment]
    plants: PlantModel = PlantModel()
    camera: CameraModel = DEFAULT_CAMERA
    survey: SurveyParams = SurveyParams()
    detector: fieldmod.DetectorModel = fieldmod.DetectorModel(detection_prob=0.9)
    filtering: FilterParams = FilterParams()
    merge: MergeParams = MergeParams()
    routing: RoutingParams = RoutingParams()
    boom: sprayer.BoomConfig = sprayer.BoomConfig()
    robot: RobotParams = RobotParams()
    verify: sprayer.VerifyModel = sprayer.VerifyModel()
    network: NetworkParams = NetworkParams()
    edge_processing_delay_s: float = 0.0
    abort_at_s: float | None = None

    def validate(self) -> None:
        if self.field_polygon is None:
            raise ScenarioValidationError("scenario has no field polygon")
        if not (0.0 <= self.survey.overlap_frac < 1.0):
            raise ScenarioValidationError("overlap_frac must be in [0, 1)")
        if self.survey.track_spacing_m <= 0 or self.survey.speed_mps <= 0:
            raise ScenarioValidationError("track spacing and speed must be positive")
        if self.survey.altitude_m <= 0:
            raise ScenarioValidationError("survey altitude must be positive")
        if self.plants.density_per_ha < 0:
            raise ScenarioValidationError("plant density must be >= 0")
        if self.merge.radius_m < 0:
            raise ScenarioValidationError("merge radius must be >= 0")
        if self.robot.tank_capacity_l <= 0:
            raise ScenarioValidationError("tank capacity must be positive")
        if self.edge_processing_delay_s < 0:
            raise ScenarioValidationError("edge processing delay must be >= 0")
        if self.plants.positions_m is not None and self.plants.diameters_m is not None \
                and len(self.plants.positions_m) != len(self.plants.diameters_m):
            raise ScenarioValidationError("positions_m and diameters_m lengths differ")
        try:
            netsim.preset_by_name(self.network.preset_name)
        except KeyError as e:
            raise ScenarioValidationError(str(e)) from e
        self.robot.drive_profile()  # raises on bad motion params


def square_field(side_m: float) -> FieldPolygon:
    return FieldPolygon([LocalPoint(0, 0), LocalPoint(side_m, 0),
                         LocalPoint(side_m, side_m), LocalPoint(0, side_m)])


def default_scenario(seed: int = 0, side_m: float = 100.0, **overrides) -> Scenario:
    """One-hectare square field with stock parameters."""
    return dataclasses.replace(
        Scenario(seed=seed, field_polygon=square_field(side_m)), **overrides)


@dataclass
class ScenarioReport:
    schema_version: int
    seed: int
    effective_config: dict
    survey: dict
    detection: dict
    route: dict
    robot: dict
    spray: dict
    plants: dict
    network: dict
    end_to_end_s: float
    events: list = dc_field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "effective_config": self.effective_config,
            "survey": self.survey,
            "detection": self.detection,
            "route": self.route,
            "robot": self.robot,
            "spray": self.spray,
            "plants": self.plants,
            "network": self.network,
            "end_to_end_s": self.end_to_end_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def reconciles(self) -> bool:
        p = self.plants
        return p["total"] == (p["sprayed"] + p["missed_by_detection"] +
                              p["missed_by_verification"] + p["missed_by_tank"] +
                              p["outside_coverage"] + p["aborted"])

    def summary_rows(self) -> list[tuple[str, object]]:
        rows: list[tuple[str, object]] = [("seed", self.seed)]
        for section in ("survey", "detection", "route", "robot", "spray",
                        "plants", "network"):
            for k, v in getattr(self, section).items():
                rows.append((f"{section}.{k}", v))
        rows.append(("end_to_end_s", self.end_to_end_s))
        return rows


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except SimulationError as e:
        raise StageError(name, str(e)) from e
    except (ValueError, KeyError) as e:
        raise StageError(name, str(e)) from e


_MISS_BUCKET = {
    "missed_verification": "missed_by_verification",
    "missed_alignment": "missed_by_verification",
    "missed_tank": "missed_by_tank",
    "aborted": "aborted",
}


def _plant_fate(outcomes: list[str]) -> str:
    if "sprayed" in outcomes:
        return "sprayed"
    if "missed_tank" in outcomes:
        return "missed_by_tank"
    if "aborted" in outcomes:
        return "aborted"
    return "missed_by_verification"


def run_scenario(sc: Scenario) -> ScenarioReport:
    """Execute the full pipeline; deterministic given the scenario (incl. seed)."""
    sc.validate()
    events: list[dict] = []

    with _stage("survey"):
        plan = mission.plan_coverage(
            sc.field_polygon, sc.survey.track_spacing_m, sc.survey.altitude_m,
            sc.survey.speed_mps, sc.survey.sweep_heading_deg, sc.survey.turn_time_s)
        schedule = mission.capture_schedule(plan, sc.camera, sc.survey.overlap_frac,
                                            sc.origin)
        estimate = mission.survey_estimate(plan, schedule, sc.survey.image_size_bits,
                                           sc.survey.fpv_rate_bps)
    events.append({"t_s": 0.0, "entity": "uav", "kind": "survey_start",
                   "payload": {"tracks": len(plan.tracks),
                               "total_track_m": plan.total_track_length_m}})
    for e in schedule:
        events.append({"t_s": e.time_s, "entity": "uav", "kind": "capture",
                       "payload": {"image_id": e.image_id,
                                   "lat": e.pose.position.lat_deg,
                                   "lon": e.pose.position.lon_deg,
                                   "heading_deg": e.pose.heading_deg}})
    events.append({"t_s": estimate.duration_s, "entity": "uav", "kind": "survey_end",
                   "payload": {"images": estimate.image_count}})

    with _stage("field"):
        truth = _ground_truth(sc)
    with _stage("detection"):
        raw_boxes = fieldmod.simulate_detections(
            truth, schedule, sc.camera, sc.detector, (sc.seed, 2), sc.origin)
        gsd = sc.camera.gsd_at(sc.survey.altitude_m)
        kept = fieldmod.filter_boxes(raw_boxes, gsd, sc.filtering.min_area_m2,
                                     sc.filtering.min_area_to_length_m)
        targets = fieldmod.georef_and_merge(kept, schedule, sc.camera,
                                            sc.merge.radius_m, sc.origin)
        vis_counts = fieldmod.visibility_counts(truth, schedule, sc.camera, sc.origin)

    t_targets = estimate.duration_s + sc.edge_processing_delay_s
    events.append({"t_s": t_targets, "entity": "edge", "kind": "targets_ready",
                   "payload": {"targets": len(targets),
                               "raw_boxes": len(raw_boxes),
                               "boxes_after_filter": len(kept)}})

    with _stage("routing"):
        start = LocalPoint(*sc.routing.robot_start_m)
        positions = targets.positions()
        nn_tour = route.nearest_neighbor(start, positions,
                                         closed=sc.routing.return_to_start)
        improved = route.improve(nn_tour, positions, sc.routing.max_depth,
                                 sc.routing.time_budget_ms)
        optimal = None
        if len(targets) <= route.BRUTE_FORCE_LIMIT:
            optimal = route.brute_force_optimal(start, positions,
                                                closed=sc.routing.return_to_start)
    events.append({"t_s": t_targets, "entity": "edge", "kind": "route_ready",
                   "payload": {"nn_length_m": nn_tour.length_m,
                               "improved_length_m": improved.length_m}})

    with _stage("spray"):
        spray_targets = _spray_targets(sc, truth, targets, kept, gsd)
        timeline, valve_schedule, spray_report = sprayer.plan_robot_mission(
            improved, spray_targets, sc.verify, sc.boom, (sc.seed, 3),
            profile=sc.robot.drive_profile(),
            tank_capacity_l=sc.robot.tank_capacity_l,
            t0_s=t_targets, abort_at_s=sc.abort_at_s)
    for seg in timeline.segments:
        events.append({"t_s": seg.t_start_s, "entity": "robot", "kind": "segment",
                       "payload": {"mode": seg.mode, "speed_mps": seg.speed_mps,
                                   "to": [seg.p_to.east_m, seg.p_to.north_m]}})
    for ve in valve_schedule.events:
        events.append({"t_s": ve.t_open_s, "entity": "robot", "kind": "valve",
                       "payload": {"nozzle_id": ve.nozzle_id,
                                   "t_close_s": ve.t_close_s,
                                   "target_id": ve.plant_id}})
    for target_id, outcome, t_out in spray_report.outcomes:
        events.append({"t_s": t_out, "entity": "robot", "kind": "target_outcome",
                       "payload": {"target_id": target_id, "outcome": outcome}})

    with _stage("network"):
        preset = netsim.preset_by_name(sc.network.preset_name)
        sources = [
            netsim.TrafficSource("uav-detection-camera", "up",
                                 rate_bps=estimate.mean_capture_rate_bps),
            netsim.TrafficSource("uav-fpv", "up", rate_bps=sc.survey.fpv_rate_bps),
        ]
        for i in range(sc.network.robot_stream_count):
            sources.append(netsim.TrafficSource(
                f"robot-camera-{i}", "up", rate_bps=sc.network.robot_stream_mbps * 1e6))
        net_duration = max(estimate.duration_s, sc.network.tick_s)
        trace = netsim.simulate_link(preset, sources, net_duration, sc.network.tick_s)
        slack = netsim.offload_slack(sc.network.camera_lookahead_m,
                                     sc.robot.detect_speed_mps, preset.rtt_s,
                                     sc.network.inference_s, sc.boom.lead_m)
    offered_bps = sum(s.rate_bps for s in sources)
    events.append({"t_s": estimate.duration_s, "entity": "network",
                   "kind": "link_summary",
                   "payload": {"preset": preset.name,
                               "mean_utilization": trace.mean_utilization,
                               "saturated": trace.saturated}})

    events.sort(key=lambda ev: ev["t_s"])
    end_to_end = max((ev["t_s"] for ev in events), default=0.0)

    plants_section = _reconcile(truth, targets, vis_counts, spray_report)
    outcome_by_target = {tid: out for tid, out, _ in spray_report.outcomes}
    real_targets = sum(1 for t in targets.targets if t.source_plants)

    report = ScenarioReport(
        schema_version=SCHEMA_VERSION,
        seed=sc.seed,
        effective_config=scenario_to_dict(sc),
        survey={
            "track_count": len(plan.tracks),
            "total_path_m": estimate.total_path_m,
            "duration_s": estimate.duration_s,
            "image_count": estimate.image_count,
            "data_volume_bits": estimate.data_volume_bits,
            "mean_capture_rate_bps": estimate.mean_capture_rate_bps,
            "fpv_rate_bps": estimate.fpv_rate_bps,
        },
        detection={
            "ground_truth_plants": len(truth.plants),
            "visible_plants": int((vis_counts > 0).sum()),
            "raw_boxes": len(raw_boxes),
            "true_boxes": sum(1 for b in raw_boxes if b.source_plant is not None),
            "spurious_boxes": sum(1 for b in raw_boxes if b.source_plant is None),
            "boxes_after_filter": len(kept),
            "targets": len(targets),
            "real_targets": real_targets,
            "ghost_targets": len(targets) - real_targets,
        },
        route={
            "targets": len(targets),
            "nn_length_m": nn_tour.length_m,
            "improved_length_m": improved.length_m,
            "optimal_length_m": None if optimal is None else optimal.length_m,
            "return_to_start": sc.routing.return_to_start,
        },
        robot={
            "start_time_s": t_targets,
            "duration_s": timeline.duration_s,
            "distance_m": timeline.distance_m,
            "segment_count": len(timeline.segments),
            "false_sprays": spray_report.false_sprays,
            "ghosts_skipped": sum(1 for o in outcome_by_target.values()
                                  if o == "skipped_ghost"),
        },
        spray={
            "tank_capacity_l": sc.robot.tank_capacity_l,
            "volume_used_l": spray_report.volume_used_l,
            "tank_remaining_l": spray_report.tank_remaining_l,
            "valve_events": len(valve_schedule.events),
            "total_open_time_s": valve_schedule.total_open_time_s,
            "volume_by_nozzle_ml": {str(k): v * 1000.0 for k, v in
                                    sorted(spray_report.volume_by_nozzle.items())},
        },
        plants=plants_section,
        network={
            "preset": preset.name,
            "offered_up_mbps": offered_bps / 1e6,
            "capacity_up_mbps": preset.uplink_mbps,
            "mean_utilization": trace.mean_utilization,
            "peak_backlog_bits": trace.peak_backlog_bits,
            "final_backlog_bits": trace.final_backlog_bits,
            "backlog_growth_mbps": trace.backlog_growth_bps() / 1e6,
            "saturated": trace.saturated,
            "offload_slack_s": slack,
        },
        end_to_end_s=end_to_end,
        events=events,
    )
    return report


def _ground_truth(sc: Scenario) -> fieldmod.GroundTruth:
    if sc.plants.positions_m is not None:
        diameters = sc.plants.diameters_m or \
            tuple(sc.plants.diameter_mean_m for _ in sc.plants.positions_m)
        plants = tuple(fieldmod.Plant(LocalPoint(e, n), d)
                       for (e, n), d in zip(sc.plants.positions_m, diameters))
        return fieldmod.GroundTruth(plants=plants)
    return fieldmod.generate_field((sc.seed, 1), sc.field_polygon,
                                   sc.plants.density_per_ha,
                                   sc.plants.diameter_mean_m,
                                   sc.plants.diameter_sigma_m)


def _spray_targets(sc: Scenario, truth: fieldmod.GroundTruth,
                   targets: fieldmod.TargetList, kept_boxes: list,
                   gsd: float) -> list[sprayer.SprayTarget]:
    box_by_id = {b.box_id: b for b in kept_boxes}
    out = []
    for idx, tgt in enumerate(targets.targets):
        if tgt.source_plants:
            diameter = max(truth.plants[p].diameter_m for p in tgt.source_plants)
        else:
            sizes = [(box_by_id[b].width_px + box_by_id[b].height_px) / 2.0 * gsd
                     for b in tgt.support if b in box_by_id]
            diameter = max(float(np.mean(sizes)) if sizes else 0.1,
                           fieldmod.MIN_PLANT_DIAMETER_M)
        out.append(sprayer.SprayTarget(target_id=idx, position=tgt.position,
                                       diameter_m=diameter,
                                       plant_ids=tgt.source_plants))
    return out


def _reconcile(truth: fieldmod.GroundTruth, targets: fieldmod.TargetList,
               vis_counts: np.ndarray,
               spray_report: sprayer.SprayReport) -> dict:
    outcome_by_target = {tid: out for tid, out, _ in spray_report.outcomes}
    plant_outcomes: dict[int, list[str]] = {}
    for idx, tgt in enumerate(targets.targets):
        for p in tgt.source_plants:
            plant_outcomes.setdefault(p, []).append(
                outcome_by_target.get(idx, "aborted"))

    counts = {"sprayed": 0, "missed_by_detection": 0, "missed_by_verification": 0,
              "missed_by_tank": 0, "outside_coverage": 0, "aborted": 0}
    for p in range(len(truth.plants)):
        if p in plant_outcomes:
            counts[_plant_fate(plant_outcomes[p])] += 1
        elif vis_counts[p] > 0:
            counts["missed_by_detection"] += 1
        else:
            counts["outside_coverage"] += 1
    section = {"total": len(truth.plants), **counts}
    section["reconciles"] = section["total"] == sum(counts.values())
    return section


# ---------------------------------------------------------------------------
# scenario (de)serialization and parameter sweeps


_SECTION_TYPES = {
    "plants": PlantModel,
    "camera": CameraModel,
    "survey": SurveyParams,
    "detector": fieldmod.DetectorModel,
    "filtering": FilterParams,
    "merge": MergeParams,
    "routing": RoutingParams,
    "boom": sprayer.BoomConfig,
    "robot": RobotParams,
    "verify": sprayer.VerifyModel,
    "network": NetworkParams,
}

_TUPLE_FIELDS = {("plants", "positions_m"), ("plants", "diameters_m"),
                 ("routing", "robot_start_m")}


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully materialized config dict (every default made explicit)."""
    out: dict = {
        "schema_version": SCHEMA_VERSION,
        "seed": sc.seed,
        "origin": {"lat": sc.origin.lat_deg, "lon": sc.origin.lon_deg},
        "field_polygon_m": [[p.east_m, p.north_m] for p in sc.field_polygon.vertices],
    }
    for section, _ in _SECTION_TYPES.items():
        obj = getattr(sc, section)
        vals = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            vals[f.name] = v
        out[section] = vals
    out["edge_processing_delay_s"] = sc.edge_processing_delay_s
    out["abort_at_s"] = sc.abort_at_s
    return out


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from a JSON-shaped dict; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ScenarioValidationError("scenario must be a JSON object")
    known_top = {"schema_version", "seed", "origin", "field_polygon_m",
                 "edge_processing_delay_s", "abort_at_s", *_SECTION_TYPES}
    unknown = set(data) - known_top
    if unknown:
        raise ScenarioValidationError(f"unknown scenario keys: {sorted(unknown)}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioValidationError(f"unsupported schema_version {version}")
    if "field_polygon_m" not in data:
        raise ScenarioValidationError("scenario requires field_polygon_m")

    try:
        origin_d = data.get("origin", {"lat": 49.0, "lon": 8.0})
        unknown = set(origin_d) - {"lat", "lon"}
        if unknown:
            raise ScenarioValidationError(f"unknown origin keys: {sorted(unknown)}")
        origin = GeoPoint(float(origin_d["lat"]), float(origin_d["lon"]))
        polygon = FieldPolygon([LocalPoint(float(e), float(n))
                                for e, n in data["field_polygon_m"]])
        kwargs: dict = {}
        for section, cls in _SECTION_TYPES.items():
            section_data = data.get(section, {})
            if not isinstance(section_data, dict):
                raise ScenarioValidationError(f"section {section!r} must be an object")
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = set(section_data) - names
            if unknown:
                raise ScenarioValidationError(
                    f"unknown keys in {section!r}: {sorted(unknown)}")
            coerced = {}
            for k, v in section_data.items():
                if (section, k) in _TUPLE_FIELDS and v is not None:
                    v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
                coerced[k] = v
            # partial sections inherit the scenario defaults field by field
            default = next(f.default for f in dataclasses.fields(Scenario)
                           if f.name == section)
            kwargs[section] = dataclasses.replace(default, **coerced)
        return Scenario(
            seed=int(data.get("seed", 0)),
            origin=origin,
            field_polygon=polygon,
            edge_processing_delay_s=float(data.get("edge_processing_delay_s", 0.0)),
            abort_at_s=data.get("abort_at_s"),
            **kwargs,
        )
    except ScenarioValidationError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ScenarioValidationError(f"invalid scenario: {e}") from e


_SCALARS = (int, float, str, bool, type(None))


def _replace_path(obj, parts: list[str], value):
    name = parts[0]
    if not dataclasses.is_dataclass(obj) or not hasattr(obj, name):
        raise UnknownParameter(f"no config field {'.'.join(parts)!r}")
    if len(parts) == 1:
        current = getattr(obj, name)
        if not isinstance(current, _SCALARS):
            raise UnknownParameter(f"{name!r} is not a scalar field")
        return dataclasses.replace(obj, **{name: value})
    child = _replace_path(getattr(obj, name), parts[1:], value)
    return dataclasses.replace(obj, **{name: child})


def set_parameter(sc: Scenario, parameter_path: str, value) -> Scenario:
    """Return a copy of the scenario with one scalar field replaced.

    The path is dotted, e.g. ``detector.detection_prob`` or ``seed``.
    """
    parts = parameter_path.split(".")
    if not parts or not all(parts):
        raise UnknownParameter(f"malformed parameter path {parameter_path!r}")
    return _replace_path(sc, parts, value)


def sweep(sc: Scenario, parameter_path: str, values) -> list[ScenarioReport]:
    """Independent runs over one parameter; all share the base seed."""
    scenarios = [set_parameter(sc, parameter_path, v) for v in values]
    return [run_scenario(s) for s in scenarios]
