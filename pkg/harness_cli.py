#!/usr/bin/env python3
"""
waveslam command-line harness.

Subcommands:
    collect       simulate a scenario and write the raw sensor log only
    process       turn a collected sensor log into points, a map and a report
    run           collect followed by process
    capabilities  distance / angle accuracy sweeps against a single wall
    report        print the summary of an output directory
    compare       compare map metrics of two output directories

Every output directory gets a manifest.json listing each artifact with its
SHA-256. Nothing time-dependent is written to files, so reruns with the same
inputs are byte-identical.

Exit codes: 0 ok, 2 configuration error, 3 runtime error.
"""

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from analytics import RunAnalytics, RunReport, export_report, write_json
from aoa_estimator import EstimatorConfig, PathEstimate, extract_paths, is_noise_only, strongest_path
from config import Config, ConfigError
from environment import (Material, Pose, RobotRig, Scenario, WallSegment, load_scenario,
                         random_walk_route, save_scenario, wrap_angle)
from ftm import (burst_from_record, burst_record, estimate_tof, jitter_scale_for_gain,
                 protocol_trace, simulate_burst)
from fusion import (GateConfig, PointEstimate, PointQuality, PointSource, RangeEstimate,
                    ReflectionGeometryError, SelectionState, mmwave_point, reflection_point,
                    select_points, write_points_csv)
from mapping import OccupancyGrid, integrate_points, score_map, write_map, write_metrics_csv
from mmwave_phy import ArrayGeometry, decode_csi, encode_csi, synthesize_csi
from noise_profiles import NoiseProfile, load_profile, profile_to_dict
from raytrace import dump_paths_csv, strongest_visible_path, trace_paths
from sensors import (event_time, lidar_record, odom_record, pose_from_record, read_sensor_log,
                     scan_from_record, simulate_lidar, simulate_odometry, write_sensor_log)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

MANIFEST = "manifest.json"
RUN_CONFIG = "run_config.json"
SENSOR_LOG = "sensor_log.jsonl"
GROUND_TRUTH = "ground_truth.csv"
SCENARIO_COPY = "scenario.json"
STREAMS = ("route", "odometry", "lidar", "ftm", "csi")
MIN_ROUTE_DT_S = 0.004  # records of one event are spread over 3 ms


@dataclass(frozen=True)
class RunOptions:
    ftm_n: int = Config.FTM_N
    max_order: int = Config.MAX_ORDER
    lidar_only: bool = False
    mmwave_only: bool = False
    random_walk_steps: int = 0
    max_events: Optional[int] = None
    dump_paths: bool = False
    ftm_trace: bool = False

    def __post_init__(self):
        if self.lidar_only and self.mmwave_only:
            raise ConfigError("--lidar-only and --mmwave-only are mutually exclusive")
        if not 1 <= self.ftm_n <= Config.FTM_MAX_N:
            raise ConfigError(f"--ftm-n must be in [1, {Config.FTM_MAX_N}], got {self.ftm_n}")
        if not 1 <= self.max_order <= 3:
            raise ConfigError(f"--max-order must be in [1, 3], got {self.max_order}")
        if self.random_walk_steps < 0:
            raise ConfigError("--random-walk must be >= 0")
        if self.max_events is not None and self.max_events < 0:
            raise ConfigError("--max-events must be >= 0")


def sensor_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent generators per sensor so toggling one source leaves the others unchanged"""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


def write_manifest(out_dir: Union[str, Path]) -> Path:
    """Hash every artifact under ``out_dir`` into manifest.json"""
    out_dir = Path(out_dir)
    artifacts = []
    for path in sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != MANIFEST):
        data = path.read_bytes()
        artifacts.append({"path": path.relative_to(out_dir).as_posix(),
                          "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
    return write_json({"artifacts": artifacts}, out_dir / MANIFEST)


def point_errors(est_pose: Pose, truth_pose: Pose, rig: RobotRig, range_estimate: RangeEstimate,
                 aoa: PathEstimate, truth_bounce: Optional[Sequence[float]],
                 truth_azimuth: float) -> Tuple[Optional[float], float]:
    """Signed (wall-distance error in m, azimuth error in deg) of one radio event.

    Wall distance is measured from the robot center to the reflection point,
    estimated from the believed pose and compared with the traced bounce.
    """
    azimuth_error = math.degrees(wrap_angle(aoa.azimuth - truth_azimuth))
    if truth_bounce is None:
        return None, azimuth_error
    initiator, responder = rig.radio_positions(est_pose)
    try:
        point = reflection_point(responder, initiator, est_pose.theta + rig.array_boresight + aoa.azimuth,
                                 range_estimate.distance_m)
    except ReflectionGeometryError:
        return None, azimuth_error
    estimated = float(np.hypot(*(point - est_pose.xy)))
    true = float(np.hypot(truth_bounce[0] - truth_pose.x, truth_bounce[1] - truth_pose.y))
    return estimated - true, azimuth_error


# ------------------------------------------------------------ collect

def collect(scenario: Scenario, seed: int, profile: NoiseProfile, out_dir: Union[str, Path],
            options: RunOptions = RunOptions()) -> List[Path]:
    """Simulate every route event and write the raw logs; returns the written paths"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = sensor_streams(seed)
    if options.random_walk_steps:
        scenario = scenario.with_route(random_walk_route(scenario, options.random_walk_steps, streams["route"]))
    if not scenario.route:
        raise ConfigError(f"scenario '{scenario.name}' has no route")
    gaps = np.diff([t for t, _ in scenario.route])
    if len(gaps) and gaps.min() <= MIN_ROUTE_DT_S:
        raise ConfigError(f"scenario '{scenario.name}': route times must be more than {MIN_ROUTE_DT_S} s apart")

    track = simulate_odometry(scenario.route, profile.odometry, streams["odometry"])
    geometry = ArrayGeometry()
    records, truth_rows, traced, trace_lines = [], [], [], []
    radio_events = 0
    for k, ((t, pose), (_, belief)) in enumerate(zip(scenario.route, track.poses)):
        records.append(odom_record(event_time(t, "odom"), belief, k))
        if not options.mmwave_only:
            scan = simulate_lidar(pose, scenario, rng=streams["lidar"], sigma=profile.lidar_sigma,
                                  dropout_prob=profile.lidar_dropout)
            records.append(lidar_record(event_time(t, "lidar"), scan, k))
        if options.lidar_only:
            continue
        if options.max_events is not None and radio_events >= options.max_events:
            continue
        initiator, responder = scenario.rig.radio_positions(pose)
        paths = trace_paths(initiator, responder, scenario.rig.boresight(pose), scenario.walls,
                            options.max_order, include_direct=not scenario.rig.direct_path_blocked)
        dominant = strongest_visible_path(paths)
        if dominant is None:
            logger.debug("event %d: no radio path inside the field of view", k)
            continue
        scale = jitter_scale_for_gain(dominant.gain) if profile.ftm_snr_scaling else 1.0
        burst = simulate_burst(dominant.delay, options.ftm_n, profile.clock, Config.FTM_SIFS_S,
                               streams["ftm"], snr_scale=scale)
        csi = synthesize_csi(paths, geometry, profile.csi_noise_sigma, profile.elevation_jitter_sigma,
                             streams["csi"])
        records.append(burst_record(burst, event_time(t, "ftm"), k))
        records.append(encode_csi(csi, event_time(t, "csi"), k))
        bounce = dominant.last_bounce
        truth_rows.append({
            "event": k, "t": t, "x": pose.x, "y": pose.y, "theta": pose.theta,
            "path_order": dominant.order, "path_length_m": dominant.length,
            "azimuth_rad": dominant.azimuth, "gain_db": dominant.gain_db,
            "bounce_x": bounce[0] if bounce else math.nan, "bounce_y": bounce[1] if bounce else math.nan,
        })
        radio_events += 1
        if options.dump_paths:
            traced.append((t, paths))
        if options.ftm_trace:
            trace_lines.append(f"# event {k} t={t!r}")
            trace_lines.extend(protocol_trace(burst))

    written = [save_scenario(scenario, out_dir / SCENARIO_COPY)]
    write_sensor_log(out_dir / SENSOR_LOG, records)
    written.append(out_dir / SENSOR_LOG)
    truth_columns = ["event", "t", "x", "y", "theta", "path_order", "path_length_m", "azimuth_rad",
                     "gain_db", "bounce_x", "bounce_y"]
    pd.DataFrame(truth_rows, columns=truth_columns).to_csv(out_dir / GROUND_TRUTH, index=False)
    written.append(out_dir / GROUND_TRUTH)
    written.append(write_json({
        "seed": seed,
        "scenario": scenario.name,
        "profile": profile_to_dict(profile),
        "options": asdict(options),
        "radio_events": radio_events,
        "route_events": len(scenario.route),
    }, out_dir / RUN_CONFIG))
    if options.dump_paths:
        written.append(dump_paths_csv(traced, out_dir / "paths.csv"))
    if options.ftm_trace:
        (out_dir / "ftm_trace.txt").write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
        written.append(out_dir / "ftm_trace.txt")
    logger.info("collected %d route events (%d radio) for '%s'", len(scenario.route), radio_events, scenario.name)
    return written


# ------------------------------------------------------------ process

def _group_events(records: Sequence[Dict]) -> Dict[int, Dict[str, Dict]]:
    events: Dict[int, Dict[str, Dict]] = defaultdict(dict)
    for record in records:
        events[int(record["event"])][record["type"]] = record
    return events


def process(out_dir: Union[str, Path], estimator: EstimatorConfig = EstimatorConfig(),
            gates: GateConfig = GateConfig()) -> RunReport:
    """Estimate, fuse and map a collected run in ``out_dir``"""
    out_dir = Path(out_dir)
    config_path = out_dir / RUN_CONFIG
    if not config_path.exists():
        raise ConfigError(f"{out_dir}: no {RUN_CONFIG}; run 'collect' first")
    run_config = json.loads(config_path.read_text(encoding="utf-8"))
    scenario = load_scenario(out_dir / SCENARIO_COPY)
    rig = scenario.rig
    truth = {int(row.event): row for row in pd.read_csv(out_dir / GROUND_TRUTH).itertuples(index=False)}
    events = _group_events(read_sensor_log(out_dir / SENSOR_LOG))

    grid = OccupancyGrid.for_scenario(scenario)
    state = SelectionState()
    analytics = RunAnalytics(scenario.name)
    all_points: List[PointEstimate] = []
    try:
        for k in sorted(events):
            event = events[k]
            belief = pose_from_record(event["odom"])
            mm_points: List[PointEstimate] = []
            if "ftm" in event and "csi" in event:
                mm_points.append(_radio_point(event, belief, rig, estimator, gates, truth.get(k), analytics))
            scan = scan_from_record(event["lidar"]) if "lidar" in event else None
            t = event["lidar"]["t"] if scan is not None else event["odom"]["t"]
            points, state = select_points(scan, mm_points, state, belief, rig.lidar_offset, t)
            lidar_origin = belief.transform(rig.lidar_offset)
            responder = rig.radio_positions(belief)[1]
            for point in points:
                analytics.count(f"{point.source.value}_{point.quality.value}")
            integrate_points(grid, lidar_origin, [p for p in points if p.source is PointSource.LIDAR])
            integrate_points(grid, responder, [p for p in points if p.source is PointSource.MMWAVE])
            all_points.extend(points)
    finally:
        write_points_csv(all_points, out_dir / "points.csv")

    counts = {source.value: analytics.counters.get(f"{source.value}_accepted", 0) for source in PointSource}
    metrics = score_map(grid, scenario, point_count=counts)
    write_map(grid, out_dir / "map.pgm")
    write_metrics_csv(metrics, out_dir / "metrics.csv", grid.dropped_points)
    analytics.count("grid_dropped_points", grid.dropped_points)
    analytics.count("route_events", len(events))
    report = analytics.build(map_metrics=metrics)
    export_report(report, out_dir)
    write_manifest(out_dir)
    logger.info("processed '%s': iou=%.3f glass_coverage=%.3f (seed %s)",
                scenario.name, metrics.iou, metrics.glass_coverage, run_config.get("seed"))
    return report


def _radio_point(event: Dict[str, Dict], belief: Pose, rig: RobotRig, estimator: EstimatorConfig,
                 gates: GateConfig, truth_row, analytics: RunAnalytics) -> PointEstimate:
    t = event["ftm"]["t"]
    analytics.count("radio_events")
    tof = estimate_tof(burst_from_record(event["ftm"]))
    estimates = extract_paths(decode_csi(event["csi"]), estimator)
    if not estimates or is_noise_only(estimates):
        analytics.count("no_estimate")
        return PointEstimate((math.nan, math.nan), PointSource.MMWAVE, t, PointQuality.REJECTED_GEOMETRY)
    if not tof > 0:
        return PointEstimate((math.nan, math.nan), PointSource.MMWAVE, t, PointQuality.REJECTED_RANGE)
    range_estimate = RangeEstimate.from_tof(tof)
    aoa = strongest_path(estimates)
    if truth_row is not None:
        truth_pose = Pose(truth_row.x, truth_row.y, truth_row.theta)
        bounce = None if math.isnan(truth_row.bounce_x) else (truth_row.bounce_x, truth_row.bounce_y)
        distance_error, azimuth_error = point_errors(belief, truth_pose, rig, range_estimate, aoa, bounce,
                                                     truth_row.azimuth_rad)
        analytics.log_sample(distance_error, azimuth_error, event=int(truth_row.event), t=t)
    return mmwave_point(belief, rig, range_estimate, aoa, gates, t)


def run(scenario_path: Union[str, Path], seed: Optional[int], noise_profile: NoiseProfile,
        out_dir: Union[str, Path], options: RunOptions = RunOptions()) -> RunReport:
    """collect + process; partial outputs are flushed and hashed if processing fails"""
    started = time.perf_counter()
    scenario = load_scenario(Config.scenario_path(str(scenario_path)))
    seed = scenario.rng_seed if seed is None else seed
    out_dir = Path(out_dir)
    try:
        collect(scenario, seed, noise_profile, out_dir, options)
        report = process(out_dir)
    except Exception:
        if out_dir.exists():
            write_manifest(out_dir)
        raise
    report.duration_s = time.perf_counter() - started
    logger.info("run '%s' finished in %.2f s", scenario.name, report.duration_s)
    return report


# ------------------------------------------------------------ capabilities

def capability_cases(mode: str) -> List[Tuple[float, float]]:
    """(wall distance m, arrival angle deg) pairs of a sweep"""
    if mode == "distance":
        return [(d, 0.0) for d in Config.CAPABILITY_DISTANCES_M]
    if mode == "angle":
        return [(d, a) for d in Config.CAPABILITY_ANGLE_DISTANCES_M for a in Config.CAPABILITY_ANGLES_DEG]
    raise ConfigError(f"unknown capabilities mode '{mode}' (expected distance or angle)")


def capability_samples(mode: str, noise_profile: NoiseProfile, seed: int, ftm_n: int = Config.FTM_N,
                       repetitions: int = Config.CAPABILITY_REPETITIONS,
                       estimator: EstimatorConfig = EstimatorConfig()) -> RunReport:
    """Repeated FTM + AoA measurements of a single brick wall, robot at the origin.

    The robot faces the wall rotated by the sweep angle, so the reflection
    arrives at that azimuth; odometry plays no part.
    """
    cases = capability_cases(mode)
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    streams = sensor_streams(seed)
    rig = RobotRig()
    geometry = ArrayGeometry()
    brick = Material("brick", 7.0, True)
    analytics = RunAnalytics(f"capabilities_{mode}", group_cols=["distance_m", "angle_deg"])
    for distance, angle in cases:
        wall = WallSegment((-20.0, distance), (20.0, distance), brick)
        pose = Pose(0.0, 0.0, math.radians(90.0 - angle))
        initiator, responder = rig.radio_positions(pose)
        paths = trace_paths(initiator, responder, rig.boresight(pose), [wall], Config.MAX_ORDER)
        dominant = strongest_visible_path(paths)
        if dominant is None:
            raise RuntimeError(f"no visible path at {distance} m / {angle} deg")
        scale = jitter_scale_for_gain(dominant.gain) if noise_profile.ftm_snr_scaling else 1.0
        for rep in range(repetitions):
            burst = simulate_burst(dominant.delay, ftm_n, noise_profile.clock, Config.FTM_SIFS_S,
                                   streams["ftm"], snr_scale=scale)
            csi = synthesize_csi(paths, geometry, noise_profile.csi_noise_sigma,
                                 noise_profile.elevation_jitter_sigma, streams["csi"])
            estimates = extract_paths(csi, estimator)
            if not estimates or is_noise_only(estimates):
                analytics.count("no_estimate")
                analytics.log_sample(None, None, distance_m=distance, angle_deg=angle, rep=rep)
                continue
            distance_error, azimuth_error = point_errors(
                pose, pose, rig, RangeEstimate.from_tof(estimate_tof(burst)), strongest_path(estimates),
                dominant.last_bounce, dominant.azimuth)
            analytics.log_sample(distance_error, azimuth_error, distance_m=distance, angle_deg=angle, rep=rep)
        analytics.count("cases")
    return analytics.build()


def capabilities(mode: str, noise_profile: NoiseProfile, seed: int, out_dir: Union[str, Path],
                 ftm_n: int = Config.FTM_N, repetitions: int = Config.CAPABILITY_REPETITIONS) -> RunReport:
    """Run a capability sweep and write its tables under ``out_dir``"""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = capability_samples(mode, noise_profile, seed, ftm_n, repetitions)
    export_report(report, out_dir, suffix=mode)
    write_manifest(out_dir)
    report.duration_s = time.perf_counter() - started
    return report


# ------------------------------------------------------------ report / compare

def read_metrics(out_dir: Union[str, Path]) -> pd.Series:
    path = Path(out_dir) / "metrics.csv"
    if not path.exists():
        raise ConfigError(f"{out_dir}: no metrics.csv (process a run first)")
    return pd.read_csv(path).iloc[0]


def compare_runs(dir_a: Union[str, Path], dir_b: Union[str, Path]) -> pd.DataFrame:
    """Side-by-side map metrics of two processed runs"""
    a, b = read_metrics(dir_a), read_metrics(dir_b)
    frame = pd.DataFrame({"metric": list(a.index), "a": a.to_numpy(dtype=float), "b": b.reindex(a.index).to_numpy(dtype=float)})
    frame["b_minus_a"] = frame["b"] - frame["a"]
    return frame


# ------------------------------------------------------------ CLI

def _print_report(report: RunReport) -> None:
    print(f"\n📊 {report.name}: {len(report.samples)} samples")
    summary = report.summary()
    if not summary.empty:
        print(summary.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if report.map_metrics is not None:
        m = report.map_metrics
        print(f"🗺️  IoU {m.iou:.3f} | glass coverage {m.glass_coverage:.3f} | points {m.point_count}")
    if report.duration_s:
        print(f"⏱️  {report.duration_s:.2f} s")


def _options(args) -> RunOptions:
    return RunOptions(ftm_n=args.ftm_n, max_order=args.max_order, lidar_only=args.lidar_only,
                      mmwave_only=args.mmwave_only, random_walk_steps=args.random_walk,
                      max_events=args.max_events, dump_paths=args.dump_paths, ftm_trace=args.ftm_trace)


def _cmd_collect(args) -> int:
    scenario = load_scenario(Config.scenario_path(args.scenario))
    seed = scenario.rng_seed if args.seed is None else args.seed
    options = _options(args)
    collect(scenario, seed, load_profile(args.profile), args.out, options)
    write_manifest(args.out)
    print(f"✅ Collected '{scenario.name}' into {args.out}")
    return EXIT_OK


def _cmd_process(args) -> int:
    _print_report(process(args.out))
    print(f"✅ Processed {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    report = run(args.scenario, args.seed, load_profile(args.profile), args.out, _options(args))
    _print_report(report)
    print(f"✅ Outputs written to {args.out}")
    return EXIT_OK


def _cmd_capabilities(args) -> int:
    report = capabilities(args.mode, load_profile(args.profile), args.seed, args.out, args.ftm_n, args.repetitions)
    _print_report(report)
    print(f"✅ Capability tables written to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    out_dir = Path(args.out)
    reports = sorted(out_dir.glob("report*.json"))
    if not reports:
        raise ConfigError(f"{out_dir}: no report*.json found")
    for path in reports:
        data = json.loads(path.read_text(encoding="utf-8"))
        print(f"\n📊 {data['name']} ({path.name}): {data['samples']} samples")
        for row in data.get("summary", []):
            group = ", ".join(f"{k}={row[k]}" for k in ("distance_m", "angle_deg") if k in row)
            print(f"   • {row['metric']:<18} {group:<28} p50={row['p50']:.4f} p80={row['p80']:.4f} max={row['max']:.4f}")
        if "map_metrics" in data:
            m = data["map_metrics"]
            print(f"   🗺️  IoU {m['iou']:.3f} | glass coverage {m['glass_coverage']:.3f}")
        for key, value in data.get("counters", {}).items():
            print(f"   {key}: {value}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    frame = compare_runs(args.a, args.b)
    print(f"\n📊 {args.a}  vs  {args.b}")
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_dir / "comparison.csv", index=False)
        write_manifest(out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waveslam", description="mmWave self-sensing + LiDAR mapping simulator")
    parser.add_argument("--log", default=Config.LOG_LEVEL, help="log level (default from WAVESLAM_LOG_LEVEL)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--scenario", required=True, help="scenario name or JSON path")
        p.add_argument("--seed", type=int, default=None, help="u64 seed (default: scenario seed)")
        p.add_argument("--profile", default=Config.DEFAULT_PROFILE, help="noise profile name or JSON path")
        p.add_argument("--out", required=True, help="output directory")
        sources = p.add_mutually_exclusive_group()
        sources.add_argument("--lidar-only", action="store_true", help="no radio measurements")
        sources.add_argument("--mmwave-only", action="store_true", help="no LiDAR scans")
        p.add_argument("--ftm-n", type=int, default=Config.FTM_N, help="FTM measurements per burst")
        p.add_argument("--max-order", type=int, default=Config.MAX_ORDER, help="max reflection order traced")
        p.add_argument("--random-walk", type=int, default=0, metavar="STEPS",
                       help="replace the scripted route by a seeded random walk")
        p.add_argument("--max-events", type=int, default=None, help="cap on radio measurement events")
        p.add_argument("--dump-paths", action="store_true", help="write paths.csv")
        p.add_argument("--ftm-trace", action="store_true", help="write ftm_trace.txt")

    p = sub.add_parser("collect", help="simulate and write raw sensor logs")
    scenario_flags(p)
    p.set_defaults(handler=_cmd_collect)

    p = sub.add_parser("run", help="collect and process a scenario")
    scenario_flags(p)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("process", help="process a collected output directory")
    p.add_argument("--out", required=True, help="directory written by collect")
    p.set_defaults(handler=_cmd_process)

    p = sub.add_parser("capabilities", help="distance / angle accuracy sweeps")
    p.add_argument("--mode", choices=("distance", "angle"), required=True)
    p.add_argument("--profile", default=Config.DEFAULT_PROFILE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--ftm-n", type=int, default=Config.FTM_N)
    p.add_argument("--repetitions", type=int, default=Config.CAPABILITY_REPETITIONS)
    p.set_defaults(handler=_cmd_capabilities)

    p = sub.add_parser("report", help="print the reports of an output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("compare", help="compare map metrics of two runs")
    p.add_argument("a", help="first processed output directory")
    p.add_argument("b", help="second processed output directory")
    p.add_argument("--out", default=None, help="write comparison.csv here")
    p.set_defaults(handler=_cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    Config.setup_logging("DEBUG" if args.verbose else args.log)
    try:
        return args.handler(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        print(f"❌ Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        logger.exception("run failed")
        print(f"❌ Runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
