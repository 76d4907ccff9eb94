#!/usr/bin/env python3
"""
End-to-end tests for the waveslam harness: collect/process/run, capability
sweeps, the command line and output determinism
"""

import hashlib
import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from analytics import DISTANCE_COLUMN, ecdf_is_valid
from config import Config, ConfigError
from environment import load_scenario
from harness_cli import (EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, RunOptions, capabilities, capability_cases,
                         collect, main, process, run, sensor_streams)
from noise_profiles import NOISELESS, load_profile
from sensors import read_sensor_log


@pytest.fixture(scope="module")
def calibrated():
    return load_profile("calibrated")


def square_room():
    return load_scenario(Config.scenario_path("square_room"))


def test_run_options_validation():
    with pytest.raises(ConfigError):
        RunOptions(lidar_only=True, mmwave_only=True)
    with pytest.raises(ConfigError):
        RunOptions(ftm_n=0)
    with pytest.raises(ConfigError):
        RunOptions(max_order=5)
    with pytest.raises(ConfigError):
        RunOptions(max_events=-1)


def test_sensor_streams_are_seeded_and_independent():
    a, b = sensor_streams(42), sensor_streams(42)
    assert a["lidar"].random() == b["lidar"].random()
    c = sensor_streams(42)
    assert c["lidar"].random() != c["ftm"].random()


def test_collect_writes_raw_logs(tmp_path):
    options = RunOptions(max_events=6, dump_paths=True, ftm_trace=True)
    collect(square_room(), 7, NOISELESS, tmp_path, options)
    for name in ("sensor_log.jsonl", "ground_truth.csv", "run_config.json", "scenario.json",
                 "paths.csv", "ftm_trace.txt"):
        assert (tmp_path / name).exists(), name
    records = read_sensor_log(tmp_path / "sensor_log.jsonl")
    times = [r["t"] for r in records]
    assert all(b > a for a, b in zip(times, times[1:]))
    kinds = [r["type"] for r in records]
    assert kinds.count("odom") == len(square_room().route)
    assert kinds.count("ftm") == kinds.count("csi") == 6
    truth = pd.read_csv(tmp_path / "ground_truth.csv")
    assert len(truth) == 6
    assert (truth["path_order"] >= 1).all()
    assert "FTM responder" in (tmp_path / "ftm_trace.txt").read_text(encoding="utf-8")


def test_lidar_only_collect_has_no_radio_records(tmp_path):
    collect(square_room(), 7, NOISELESS, tmp_path, RunOptions(lidar_only=True))
    kinds = {r["type"] for r in read_sensor_log(tmp_path / "sensor_log.jsonl")}
    assert kinds == {"odom", "lidar"}
    assert pd.read_csv(tmp_path / "ground_truth.csv").empty


def test_random_walk_replaces_route(tmp_path):
    collect(square_room(), 3, NOISELESS, tmp_path, RunOptions(random_walk_steps=25, lidar_only=True))
    walked = load_scenario(tmp_path / "scenario.json")
    assert len(walked.route) == 25
    assert walked.walls == square_room().walls


def test_process_requires_collect(tmp_path):
    with pytest.raises(ConfigError):
        process(tmp_path)


def test_noiseless_run_is_accurate(tmp_path):
    report = run("square_room", None, NOISELESS, tmp_path, RunOptions(max_events=12))
    assert len(report.samples) == 12
    assert np.percentile(np.abs(report.distance_errors), 90) < 0.05
    assert np.max(np.abs(report.azimuth_errors)) < 1.0
    points = pd.read_csv(tmp_path / "points.csv")
    accepted = points[(points["source"] == "mmwave") & (points["quality"] == "accepted")]
    # accepted mmWave points sit on the 5 m square walls
    on_wall = np.minimum.reduce([accepted["x"].abs(), (accepted["x"] - 5).abs(),
                                 accepted["y"].abs(), (accepted["y"] - 5).abs()])
    assert len(accepted) > 0
    assert (on_wall < 0.05).all()
    assert report.map_metrics.iou > 0.3


def test_noiseless_full_square_room_map(tmp_path):
    report = run("square_room", None, NOISELESS, tmp_path, RunOptions())
    assert report.map_metrics.iou >= 0.95


def test_source_flags_partition_the_points(tmp_path):
    mm = run("square_room", None, NOISELESS, tmp_path / "mm", RunOptions(mmwave_only=True, max_events=8))
    lidar = run("square_room", None, NOISELESS, tmp_path / "lidar", RunOptions(lidar_only=True))
    mm_points = pd.read_csv(tmp_path / "mm" / "points.csv")
    lidar_points = pd.read_csv(tmp_path / "lidar" / "points.csv")
    assert len(mm_points) > 0 and set(mm_points["source"]) == {"mmwave"}
    assert len(lidar_points) > 0 and set(lidar_points["source"]) == {"lidar"}
    assert mm.map_metrics.point_count["lidar"] == 0
    assert lidar.map_metrics.point_count["mmwave"] == 0
    kinds = {r["type"] for r in read_sensor_log(tmp_path / "mm" / "sensor_log.jsonl")}
    assert kinds == {"odom", "ftm", "csi"}


def test_noise_only_snapshots_count_as_missing_estimates(tmp_path):
    drowned = replace(NOISELESS, csi_noise_sigma=1.0)
    report = capabilities("distance", drowned, 0, tmp_path, repetitions=3)
    assert report.counters["no_estimate"] == 4 * 3
    assert report.samples[DISTANCE_COLUMN].isna().all()


def test_run_outputs_and_manifest(tmp_path):
    run("square_room", 5, NOISELESS, tmp_path, RunOptions(max_events=4))
    for name in ("points.csv", "map.pgm", "map.yaml", "metrics.csv", "errors.csv", "ecdf_distance.csv",
                 "ecdf_azimuth.csv", "summary.csv", "report.json", "manifest.json"):
        assert (tmp_path / name).exists(), name
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    paths = [a["path"] for a in manifest["artifacts"]]
    assert paths == sorted(paths)
    assert "manifest.json" not in paths
    for artifact in manifest["artifacts"]:
        data = (tmp_path / artifact["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == artifact["sha256"]
    assert ecdf_is_valid(pd.read_csv(tmp_path / "ecdf_distance.csv"))


def test_rerun_is_byte_identical(tmp_path):
    argv = ["run", "--scenario", "square_room", "--profile", "calibrated", "--max-events", "5"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(argv + ["--out", str(tmp_path / "b")]) == EXIT_OK
    manifest_a = (tmp_path / "a" / "manifest.json").read_bytes()
    assert manifest_a == (tmp_path / "b" / "manifest.json").read_bytes()
    assert main(["capabilities", "--mode", "angle", "--profile", "noiseless", "--repetitions", "2",
                 "--out", str(tmp_path / "c")]) == EXIT_OK
    assert main(["capabilities", "--mode", "angle", "--profile", "noiseless", "--repetitions", "2",
                 "--out", str(tmp_path / "d")]) == EXIT_OK
    assert (tmp_path / "c" / "manifest.json").read_bytes() == (tmp_path / "d" / "manifest.json").read_bytes()


def test_seed_changes_outputs(tmp_path):
    base = ["run", "--scenario", "square_room", "--profile", "calibrated", "--max-events", "3"]
    main(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    main(base + ["--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "sensor_log.jsonl").read_bytes() != (tmp_path / "b" / "sensor_log.jsonl").read_bytes()


def test_collect_then_process_matches_run(tmp_path):
    argv = ["--scenario", "square_room", "--profile", "calibrated", "--max-events", "4"]
    assert main(["collect"] + argv + ["--out", str(tmp_path / "split")]) == EXIT_OK
    assert main(["process", "--out", str(tmp_path / "split")]) == EXIT_OK
    assert main(["run"] + argv + ["--out", str(tmp_path / "whole")]) == EXIT_OK
    for name in ("points.csv", "metrics.csv", "errors.csv"):
        assert (tmp_path / "split" / name).read_bytes() == (tmp_path / "whole" / name).read_bytes()


def test_report_and_compare_commands(tmp_path, capsys):
    main(["run", "--scenario", "square_room", "--profile", "noiseless", "--max-events", "3",
          "--out", str(tmp_path / "a")])
    main(["run", "--scenario", "square_room", "--profile", "noiseless", "--lidar-only",
          "--out", str(tmp_path / "b")])
    assert main(["report", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "square_room" in capsys.readouterr().out
    assert main(["compare", str(tmp_path / "b"), str(tmp_path / "a"), "--out", str(tmp_path / "cmp")]) == EXIT_OK
    comparison = pd.read_csv(tmp_path / "cmp" / "comparison.csv")
    assert {"metric", "a", "b", "b_minus_a"} <= set(comparison.columns)
    assert (tmp_path / "cmp" / "manifest.json").exists()


def test_exit_codes(tmp_path):
    assert main(["run", "--scenario", "no_such_scenario", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["run", "--scenario", "square_room", "--profile", "no_such_profile",
                 "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["run", "--scenario", "square_room", "--ftm-n", "40", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["report", "--out", str(tmp_path / "empty")]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", "square_room", "--lidar-only", "--mmwave-only", "--out", str(tmp_path)])
    assert exc.value.code == 2

    collect(square_room(), 7, NOISELESS, tmp_path / "corrupt", RunOptions(max_events=2))
    (tmp_path / "corrupt" / "sensor_log.jsonl").write_text("{not json\n", encoding="utf-8")
    assert main(["process", "--out", str(tmp_path / "corrupt")]) == EXIT_RUNTIME


def test_capability_cases():
    assert capability_cases("distance") == [(1.0, 0.0), (3.0, 0.0), (5.0, 0.0), (7.0, 0.0)]
    assert len(capability_cases("angle")) == 27
    with pytest.raises(ConfigError):
        capability_cases("height")


def test_noiseless_distance_sweep_within_quantization(tmp_path):
    report = capabilities("distance", NOISELESS, 0, tmp_path, repetitions=5)
    # FTM timestamps are quantized to 0.1 ns, i.e. about 1.5 cm of wall distance
    assert np.max(np.abs(report.distance_errors)) <= 0.02
    assert np.max(np.abs(report.azimuth_errors)) <= 0.2
    for name in ("capabilities_distance.csv", "ecdf_distance_distance.csv", "ecdf_distance_azimuth.csv",
                 "summary_distance.csv", "report_distance.json", "manifest.json"):
        assert (tmp_path / name).exists(), name


def test_calibrated_distance_sweep(tmp_path, calibrated):
    """80% of distance errors under 10 cm at 1-5 m, all under 22 cm, growing with range"""
    report = capabilities("distance", calibrated, 0, tmp_path)
    samples = report.samples
    assert len(samples) == 4 * 50
    errors = samples.assign(abs_err=samples["distance_error_m"].abs())
    for distance in (1.0, 3.0, 5.0):
        group = errors[errors["distance_m"] == distance]["abs_err"]
        assert np.percentile(group, 80) <= 0.10
    assert errors["abs_err"].max() <= 0.22
    medians = errors.groupby("distance_m")["abs_err"].median()
    assert medians[7.0] >= medians[1.0]


def test_calibrated_angle_sweep(tmp_path, calibrated):
    report = capabilities("angle", calibrated, 0, tmp_path)
    assert len(report.samples) == 27 * 50
    assert np.max(np.abs(report.azimuth_errors)) <= 20.0
    assert np.max(np.abs(report.distance_errors)) <= 0.22
    table = report.azimuth_ecdf()
    assert ecdf_is_valid(table, ["distance_m", "angle_deg"])


def test_glass_corridor_mapping(tmp_path, calibrated):
    lidar = run("glass_corridor", None, calibrated, tmp_path / "lidar", RunOptions(lidar_only=True))
    fused = run("glass_corridor", None, calibrated, tmp_path / "fused", RunOptions())
    assert lidar.map_metrics.glass_coverage <= 0.10
    assert fused.map_metrics.glass_coverage >= 0.80
    assert fused.map_metrics.iou >= lidar.map_metrics.iou
    assert fused.map_metrics.point_count["mmwave"] > 0


if __name__ == "__main__":
    print("🧪 Testing waveslam harness")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-v"]))
