"""Command-line front end: scenario files in, reports and traces out.

Subcommands mirror the pipeline stages (plan-survey, gen-field, detect,
optimize-route, spray-plan, netcheck) plus whole-mission entry points
(simulate, sweep, report). Every output file embeds the effective
configuration and seed so results are reproducible from artifacts alone.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import engine, mission, netsim, route, sprayer
from . import field as fieldmod
from .errors import ScenarioValidationError, SimulationError, UnknownParameter
from .geo import LocalPoint

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _load_scenario(path: str, seed: int | None) -> engine.Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ScenarioValidationError(f"scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"scenario file is not valid JSON: {e}")
    sc = engine.scenario_from_dict(data)
    if seed is not None:
        sc = engine.set_parameter(sc, "seed", int(seed))
    sc.validate()
    return sc


def _header(sc: engine.Scenario) -> dict:
    return {"schema_version": engine.SCHEMA_VERSION, "seed": sc.seed,
            "effective_config": engine.scenario_to_dict(sc)}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_jsonl(path: Path, header: dict, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(json.dumps({"kind": "header", **header}, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _write_csv(path: Path, header: dict, columns: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# seed: {header['seed']}\n")
        fh.write("# effective_config: " +
                 json.dumps(header["effective_config"], sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _cmd_plan_survey(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    plan = mission.plan_coverage(sc.field_polygon, sc.survey.track_spacing_m,
                                 sc.survey.altitude_m, sc.survey.speed_mps,
                                 sc.survey.sweep_heading_deg, sc.survey.turn_time_s)
    schedule = mission.capture_schedule(plan, sc.camera, sc.survey.overlap_frac,
                                        sc.origin)
    est = mission.survey_estimate(plan, schedule, sc.survey.image_size_bits,
                                  sc.survey.fpv_rate_bps)
    out = Path(args.out_dir)
    _write_json(out / "survey_plan.json", {
        **_header(sc),
        "tracks": [{"start_m": [t.start.east_m, t.start.north_m],
                    "end_m": [t.end.east_m, t.end.north_m],
                    "heading_deg": t.heading_deg} for t in plan.tracks],
        "estimate": {
            "total_path_m": est.total_path_m, "duration_s": est.duration_s,
            "image_count": est.image_count,
            "data_volume_bits": est.data_volume_bits,
            "mean_capture_rate_bps": est.mean_capture_rate_bps,
            "fpv_rate_bps": est.fpv_rate_bps},
    })
    _write_jsonl(out / "captures.jsonl", _header(sc),
                 ({"t_s": e.time_s, "image_id": e.image_id,
                   "lat": e.pose.position.lat_deg, "lon": e.pose.position.lon_deg,
                   "altitude_m": e.pose.altitude_agl_m,
                   "heading_deg": e.pose.heading_deg} for e in schedule))
    print(f"tracks:            {len(plan.tracks)}")
    print(f"total path:        {est.total_path_m:.1f} m")
    print(f"survey duration:   {est.duration_s:.1f} s ({est.duration_s / 60:.1f} min)")
    print(f"images:            {est.image_count}")
    print(f"capture rate:      {est.mean_capture_rate_bps / 1e6:.1f} Mbit/s")
    print(f"fpv rate:          {est.fpv_rate_bps / 1e6:.1f} Mbit/s")
    print(f"wrote {out / 'survey_plan.json'} and {out / 'captures.jsonl'}")
    return EXIT_OK


def _cmd_gen_field(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    truth = engine._ground_truth(sc)
    _write_json(Path(args.out), {
        **_header(sc),
        "plants": [{"east_m": p.position.east_m, "north_m": p.position.north_m,
                    "diameter_m": p.diameter_m} for p in truth.plants],
    })
    print(f"{len(truth.plants)} plants -> {args.out}")
    return EXIT_OK


def _run_detection(sc: engine.Scenario):
    plan = mission.plan_coverage(sc.field_polygon, sc.survey.track_spacing_m,
                                 sc.survey.altitude_m, sc.survey.speed_mps,
                                 sc.survey.sweep_heading_deg, sc.survey.turn_time_s)
    schedule = mission.capture_schedule(plan, sc.camera, sc.survey.overlap_frac,
                                        sc.origin)
    truth = engine._ground_truth(sc)
    raw = fieldmod.simulate_detections(truth, schedule, sc.camera, sc.detector,
                                       (sc.seed, 2), sc.origin)
    gsd = sc.camera.gsd_at(sc.survey.altitude_m)
    kept = fieldmod.filter_boxes(raw, gsd, sc.filtering.min_area_m2,
                                 sc.filtering.min_area_to_length_m)
    targets = fieldmod.georef_and_merge(kept, schedule, sc.camera,
                                        sc.merge.radius_m, sc.origin)
    return truth, raw, kept, targets


def _cmd_detect(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    truth, raw, kept, targets = _run_detection(sc)
    out = Path(args.out_dir)
    _write_jsonl(out / "detections.jsonl", _header(sc),
                 ({"image_id": b.image_id, "box_id": b.box_id,
                   "cx_px": b.cx_px, "cy_px": b.cy_px,
                   "width_px": b.width_px, "height_px": b.height_px,
                   "score": b.score} for b in raw))
    _write_json(out / "targets.json", {
        **_header(sc),
        "targets": [{"east_m": t.position.east_m, "north_m": t.position.north_m,
                     "support": list(t.support)} for t in targets.targets],
    })
    _write_csv(out / "targets.csv", _header(sc),
               ["east_m", "north_m", "support_count"],
               [[t.position.east_m, t.position.north_m, len(t.support)]
                for t in targets.targets])
    print(f"plants: {len(truth.plants)}  raw boxes: {len(raw)}  "
          f"after filter: {len(kept)}  targets: {len(targets)}")
    print(f"wrote detections.jsonl, targets.json, targets.csv under {out}")
    return EXIT_OK


def _read_targets(path: str) -> list[LocalPoint]:
    p = Path(path)
    if not p.exists():
        raise ScenarioValidationError(f"targets file not found: {path}")
    if p.suffix.lower() == ".json":
        data = json.loads(p.read_text())
        rows = data["targets"] if isinstance(data, dict) else data
        return [LocalPoint(float(r["east_m"]), float(r["north_m"])) for r in rows]
    points = []
    with p.open() as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None:
            return []
        cols = {name: i for i, name in enumerate(header)}
        if "east_m" not in cols or "north_m" not in cols:
            raise ScenarioValidationError(
                "targets CSV needs east_m and north_m columns")
        for row in reader:
            if row:
                points.append(LocalPoint(float(row[cols["east_m"]]),
                                         float(row[cols["north_m"]])))
    return points


def _cmd_optimize_route(args) -> int:
    targets = _read_targets(args.targets)
    sc = _load_scenario(args.scenario, args.seed) if args.scenario else \
        engine.default_scenario()
    start = LocalPoint(*sc.routing.robot_start_m)
    closed = args.return_to_start or sc.routing.return_to_start
    nn = route.nearest_neighbor(start, targets, closed=closed)
    result = {"heuristic": args.heuristic, "targets": len(targets),
              "return_to_start": closed,
              "nn_length_m": nn.length_m, "nn_order": list(nn.order)}
    best = nn
    if args.heuristic in ("improved", "both"):
        improved = route.improve(nn, targets, sc.routing.max_depth,
                                 sc.routing.time_budget_ms)
        result["improved_length_m"] = improved.length_m
        result["improved_order"] = list(improved.order)
        best = improved
    if len(targets) <= route.BRUTE_FORCE_LIMIT:
        optimal = route.brute_force_optimal(start, targets, closed=closed)
        result["optimal_length_m"] = optimal.length_m
    payload = {**_header(sc), **result,
               "waypoints_m": [[targets[i].east_m, targets[i].north_m]
                               for i in best.order]}
    _write_json(Path(args.out), payload)
    print(f"nn length:       {nn.length_m:.2f} m")
    if "improved_length_m" in result:
        print(f"improved length: {result['improved_length_m']:.2f} m")
    if "optimal_length_m" in result:
        print(f"optimal length:  {result['optimal_length_m']:.2f} m")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_spray_plan(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    points = _read_targets(args.targets)
    spray_targets = [sprayer.SprayTarget(target_id=i, position=p,
                                         diameter_m=sc.plants.diameter_mean_m,
                                         plant_ids=(i,))
                     for i, p in enumerate(points)]
    start = LocalPoint(*sc.routing.robot_start_m)
    nn = route.nearest_neighbor(start, points, closed=sc.routing.return_to_start)
    tour = route.improve(nn, points, sc.routing.max_depth, sc.routing.time_budget_ms)
    timeline, schedule, report = sprayer.plan_robot_mission(
        tour, spray_targets, sc.verify, sc.boom, (sc.seed, 3),
        profile=sc.robot.drive_profile(), tank_capacity_l=sc.robot.tank_capacity_l,
        abort_at_s=sc.abort_at_s)
    out = Path(args.out_dir)
    _write_csv(out / "valve_schedule.csv", _header(sc),
               ["nozzle_id", "t_open_s", "t_close_s", "plant_id"],
               [[e.nozzle_id, e.t_open_s, e.t_close_s, e.plant_id]
                for e in schedule.events])
    _write_json(out / "spray_report.json", {
        **_header(sc),
        "route_length_m": tour.length_m,
        "mission_duration_s": timeline.duration_s,
        "volume_used_l": report.volume_used_l,
        "tank_remaining_l": report.tank_remaining_l,
        "plants_sprayed": report.plants_sprayed,
        "plants_missed": report.plants_missed,
        "false_sprays": report.false_sprays,
        "outcomes": [{"target_id": tid, "outcome": o, "t_s": t}
                     for tid, o, t in report.outcomes],
    })
    print(f"targets: {len(points)}  sprayed: {report.plants_sprayed}  "
          f"missed: {report.plants_missed}")
    print(f"volume used: {report.volume_used_l * 1000:.1f} ml  "
          f"remaining: {report.tank_remaining_l:.3f} L")
    print(f"wrote valve_schedule.csv and spray_report.json under {out}")
    return EXIT_OK


def _cmd_netcheck(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    plan = mission.plan_coverage(sc.field_polygon, sc.survey.track_spacing_m,
                                 sc.survey.altitude_m, sc.survey.speed_mps,
                                 sc.survey.sweep_heading_deg, sc.survey.turn_time_s)
    schedule = mission.capture_schedule(plan, sc.camera, sc.survey.overlap_frac,
                                        sc.origin)
    est = mission.survey_estimate(plan, schedule, sc.survey.image_size_bits,
                                  sc.survey.fpv_rate_bps)
    sources = [netsim.TrafficSource("uav-detection-camera", "up",
                                    rate_bps=est.mean_capture_rate_bps),
               netsim.TrafficSource("uav-fpv", "up", rate_bps=sc.survey.fpv_rate_bps)]
    for i in range(sc.network.robot_stream_count):
        sources.append(netsim.TrafficSource(
            f"robot-camera-{i}", "up", rate_bps=sc.network.robot_stream_mbps * 1e6))
    offered = sum(s.rate_bps for s in sources)

    if args.preset == "all":
        to_check = netsim.presets()
    else:
        try:
            to_check = [netsim.preset_by_name(args.preset)]
        except KeyError as e:
            raise ScenarioValidationError(str(e))
    results = []
    window_s = max(min(est.duration_s, 30.0), 1.0)
    for preset in to_check:
        trace = netsim.simulate_link(preset, sources, window_s,
                                     sc.network.tick_s)
        slack = netsim.offload_slack(sc.network.camera_lookahead_m,
                                     sc.robot.detect_speed_mps, preset.rtt_s,
                                     sc.network.inference_s, sc.boom.lead_m)
        verdict = "uplink infeasible" if offered > preset.capacity_bps("up") \
            else "uplink feasible"
        results.append({
            "preset": preset.name, "verdict": verdict,
            "offered_up_mbps": offered / 1e6,
            "capacity_up_mbps": preset.uplink_mbps,
            "mean_utilization": trace.mean_utilization,
            "backlog_growth_mbps": trace.backlog_growth_bps() / 1e6,
            "saturated": trace.saturated,
            "offload_slack_s": slack,
            "offload_feasible": slack >= 0,
        })
        print(f"{preset.name:15s} {verdict:18s} offered "
              f"{offered / 1e6:7.1f} Mbit/s vs uplink {preset.uplink_mbps:6.1f} "
              f"Mbit/s  util {trace.mean_utilization:5.2f}  "
              f"slack {slack * 1000:6.0f} ms")
    if args.out:
        _write_json(Path(args.out), {**_header(sc), "results": results})
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    report = engine.run_scenario(sc)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    _write_jsonl(out / "events.jsonl",
                 {"schema_version": report.schema_version, "seed": report.seed,
                  "effective_config": report.effective_config},
                 report.events)
    _write_csv(out / "summary.csv",
               {"seed": report.seed, "effective_config": report.effective_config},
               ["key", "value"],
               [[k, json.dumps(v) if isinstance(v, (dict, list)) else v]
                for k, v in report.summary_rows()])
    _print_report(report)
    print(f"wrote report.json, events.jsonl, summary.csv under {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    sc = _load_scenario(args.scenario, args.seed)
    values = []
    for chunk in args.values.split(","):
        chunk = chunk.strip()
        try:
            values.append(json.loads(chunk))
        except json.JSONDecodeError:
            values.append(chunk)
    scenarios = [engine.set_parameter(sc, args.param, v) for v in values]
    if args.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(engine.run_scenario, scenarios))
    else:
        reports = [engine.run_scenario(s) for s in scenarios]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (v, rep) in enumerate(zip(values, reports)):
        (out / f"report_{i:03d}.json").write_text(rep.to_json())
        rows.append([args.param, json.dumps(v), rep.plants["total"],
                     rep.plants["sprayed"], rep.route["improved_length_m"],
                     rep.spray["volume_used_l"], rep.network["saturated"],
                     rep.end_to_end_s])
    _write_csv(out / "sweep_summary.csv",
               {"seed": sc.seed, "effective_config": engine.scenario_to_dict(sc)},
               ["param", "value", "plants", "sprayed", "route_length_m",
                "volume_used_l", "link_saturated", "end_to_end_s"], rows)
    print(f"{len(reports)} runs -> {out}")
    return EXIT_OK


def _print_report(report: engine.ScenarioReport) -> None:
    s, d, r = report.survey, report.detection, report.route
    p, n = report.plants, report.network
    print(f"survey:   {s['track_count']} tracks, {s['duration_s']:.0f} s, "
          f"{s['image_count']} images, "
          f"{s['mean_capture_rate_bps'] / 1e6:.1f} Mbit/s capture rate")
    print(f"detect:   {d['ground_truth_plants']} plants -> {d['raw_boxes']} boxes "
          f"-> {d['boxes_after_filter']} after filter -> {d['targets']} targets")
    imp = r["improved_length_m"]
    print(f"route:    nn {r['nn_length_m']:.1f} m, improved {imp:.1f} m")
    print(f"spray:    {p['sprayed']}/{p['total']} sprayed, "
          f"{report.spray['volume_used_l'] * 1000:.1f} ml used")
    print(f"plants:   det-miss {p['missed_by_detection']}, verify-miss "
          f"{p['missed_by_verification']}, tank-miss {p['missed_by_tank']}, "
          f"outside {p['outside_coverage']}, aborted {p['aborted']} "
          f"(reconciles: {p['reconciles']})")
    print(f"network:  {n['preset']} offered {n['offered_up_mbps']:.1f}/"
          f"{n['capacity_up_mbps']:.0f} Mbit/s up, util {n['mean_utilization']:.2f}, "
          f"saturated: {n['saturated']}")
    print(f"sim time: {report.end_to_end_s:.0f} s end to end")


def _cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.report).read_text())
    except FileNotFoundError:
        raise ScenarioValidationError(f"report file not found: {args.report}")
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"report file is not valid JSON: {e}")
    try:
        report = engine.ScenarioReport(
            schema_version=data["schema_version"], seed=data["seed"],
            effective_config=data["effective_config"], survey=data["survey"],
            detection=data["detection"], route=data["route"], robot=data["robot"],
            spray=data["spray"], plants=data["plants"], network=data["network"],
            end_to_end_s=data["end_to_end_s"])
    except KeyError as e:
        raise ScenarioValidationError(f"report is missing section {e}")
    _print_report(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rumexsim",
        description="Deterministic survey/detect/route/spray mission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required,
                       help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")

    p = sub.add_parser("plan-survey", help="lay tracks and the capture schedule")
    add_common(p)
    p.add_argument("--out-dir", default="out", help="output directory")
    p.set_defaults(func=_cmd_plan_survey)

    p = sub.add_parser("gen-field", help="synthesize a ground-truth plant map")
    add_common(p)
    p.add_argument("--out", default="out/ground_truth.json")
    p.set_defaults(func=_cmd_gen_field)

    p = sub.add_parser("detect", help="simulate detection and build the target list")
    add_common(p)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("optimize-route", help="order targets into a short tour")
    p.add_argument("--targets", required=True, help="targets CSV or JSON")
    p.add_argument("--heuristic", choices=["nn", "improved", "both"],
                   default="both")
    p.add_argument("--return-to-start", action="store_true",
                   help="close the tour back at the start point")
    p.add_argument("--out", default="out/route.json")
    add_common(p, scenario_required=False)
    p.set_defaults(func=_cmd_optimize_route)

    p = sub.add_parser("spray-plan", help="robot mission and valve schedule")
    p.add_argument("--targets", required=True, help="targets CSV or JSON")
    add_common(p)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_spray_plan)

    p = sub.add_parser("netcheck", help="uplink feasibility per network preset")
    add_common(p)
    p.add_argument("--preset", default="all",
                   help="preset name or 'all'")
    p.add_argument("--out", default=None, help="optional JSON output")
    p.set_defaults(func=_cmd_netcheck)

    p = sub.add_parser("simulate", help="run the full pipeline")
    add_common(p)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="re-run the scenario over one parameter")
    add_common(p)
    p.add_argument("--param", required=True,
                   help="dotted config path, e.g. detector.detection_prob")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--out-dir", default="out/sweep")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="pretty-print a stored report")
    p.add_argument("--report", required=True, help="report.json from simulate")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioValidationError, UnknownParameter) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SimulationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # pragma: no cover - unexpected failures
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
