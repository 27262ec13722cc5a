"""Deterministic mission simulator for UAV-scouted, robot-sprayed weed control.

The pipeline: plan a boustrophedon survey over a field polygon, simulate
what the image-analysis stage would report, merge detections into world
targets, route the sprayer robot through them, schedule per-nozzle valve
windows, account for herbicide volume, and check the whole operation
against cellular uplink presets.
"""
from .engine import (Scenario, ScenarioReport, default_scenario, run_scenario,
                     scenario_from_dict, scenario_to_dict, set_parameter, sweep)
from .field import (BBox, DetectorModel, GroundTruth, Plant, Target, TargetList,
                    filter_boxes, generate_field, georef_and_merge,
                    simulate_detections)
from .geo import (DEFAULT_CAMERA, CameraModel, GeoPoint, LocalPoint, Pose,
                  enu_to_wgs84, footprint, ground_to_pixel, pixel_to_ground,
                  wgs84_to_enu)
from .mission import (CaptureEvent, FieldPolygon, SurveyEstimate, SurveyPlan,
                      Track, capture_schedule, plan_coverage, survey_estimate)
from .netsim import (LinkPreset, LinkTrace, TrafficSource, offload_slack,
                     preset_by_name, presets, simulate_link)
from .route import (Tour, brute_force_optimal, improve, nearest_neighbor,
                    tour_length)
from .sprayer import (BoomConfig, DriveProfile, PassPlant, RobotTimeline,
                      SprayReport, SprayTarget, ValveEvent, ValveSchedule,
                      VerifyModel, assign_nozzles, boom_layout,
                      max_speed_for_dose, plan_robot_mission, schedule_spray,
                      volume_used)

__version__ = "0.1.0"

__all__ = [
    "Scenario", "ScenarioReport", "default_scenario", "run_scenario",
    "scenario_from_dict", "scenario_to_dict", "set_parameter", "sweep",
    "BBox", "DetectorModel", "GroundTruth", "Plant", "Target", "TargetList",
    "filter_boxes", "generate_field", "georef_and_merge", "simulate_detections",
    "DEFAULT_CAMERA", "CameraModel", "GeoPoint", "LocalPoint", "Pose",
    "enu_to_wgs84", "footprint", "ground_to_pixel", "pixel_to_ground",
    "wgs84_to_enu",
    "CaptureEvent", "FieldPolygon", "SurveyEstimate", "SurveyPlan", "Track",
    "capture_schedule", "plan_coverage", "survey_estimate",
    "LinkPreset", "LinkTrace", "TrafficSource", "offload_slack",
    "preset_by_name", "presets", "simulate_link",
    "Tour", "brute_force_optimal", "improve", "nearest_neighbor", "tour_length",
    "BoomConfig", "DriveProfile", "PassPlant", "RobotTimeline", "SprayReport",
    "SprayTarget", "ValveEvent", "ValveSchedule", "VerifyModel",
    "assign_nozzles", "boom_layout", "max_speed_for_dose", "plan_robot_mission",
    "schedule_spray", "volume_used",
    "__version__",
]
