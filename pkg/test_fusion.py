#!/usr/bin/env python3
"""
Tests for mmWave point estimation, gating and LiDAR/mmWave point selection
"""

import math

import numpy as np
import pandas as pd
import pytest

from aoa_estimator import PathEstimate
from config import Config
from environment import Pose, RobotRig
from fusion import (POINT_COLUMNS, GateConfig, PointEstimate, PointQuality, PointSource, RangeEstimate,
                    ReflectionGeometryError, SelectionState, gate_quality, mmwave_point, reflection_point,
                    select_points, write_points_csv)
from sensors import LidarScan, lidar_bearings

NORTH = Pose(0.0, 0.0, math.pi / 2)
MIRROR_D_HAT = 2.0 * math.sqrt(4.01)


def aoa(azimuth_deg=0.0, elevation_deg=0.0, gain=1e-3):
    return PathEstimate(gain=gain, elevation=math.radians(elevation_deg), azimuth=math.radians(azimuth_deg),
                        residual_power_after=0.0)


def mirror_aoa():
    """Arrival from the bounce at (0, 2) seen by the responder at (0.1, 0), robot facing north"""
    return aoa(math.degrees(math.atan2(2.0, -0.1) - math.pi / 2))


def scan_with(ranges_by_beam):
    bearings = lidar_bearings(math.radians(1.0))
    ranges = np.full(len(bearings), math.inf)
    for beam, r in ranges_by_beam.items():
        ranges[beam] = r
    return LidarScan(pose_truth=None, bearings=bearings, ranges=ranges, max_range=12.0, sigma=0.0)


def mm_at(bearing_deg, range_m, t=1.0):
    b = math.radians(bearing_deg)
    return PointEstimate((range_m * math.cos(b), range_m * math.sin(b)), PointSource.MMWAVE, t)


def test_range_estimate_invariants():
    est = RangeEstimate.from_tof(1e-8)
    assert est.distance_m == pytest.approx(Config.SPEED_OF_LIGHT * 1e-8)
    with pytest.raises(ValueError):
        RangeEstimate(distance_m=0.0, tof_s=0.0)
    with pytest.raises(ValueError):
        RangeEstimate(distance_m=3.0, tof_s=1e-8)


def test_accepted_point_needs_finite_coordinates():
    with pytest.raises(ValueError):
        PointEstimate((math.nan, 1.0), PointSource.MMWAVE, 0.0)
    rejected = PointEstimate((math.nan, math.nan), PointSource.MMWAVE, 0.0, PointQuality.REJECTED_RANGE)
    assert not rejected.accepted


def test_reflection_point_zero_baseline_is_half_range():
    p = reflection_point((1.0, 1.0), (1.0, 1.0), 0.0, 4.0)
    assert np.allclose(p, (3.0, 1.0))


def test_reflection_point_mirror_fixture():
    p = reflection_point((0.1, 0.0), (-0.1, 0.0), math.atan2(2.0, -0.1), MIRROR_D_HAT)
    assert np.allclose(p, (0.0, 2.0), rtol=0.0, atol=1e-9)


def test_reflection_point_on_ellipse():
    rng = np.random.default_rng(3)
    responder, initiator = np.array([0.1, 0.0]), np.array([-0.1, 0.0])
    for _ in range(200):
        d_hat = rng.uniform(0.3, 10.0)
        bearing = rng.uniform(-math.pi, math.pi)
        p = reflection_point(responder, initiator, bearing, d_hat)
        total = np.linalg.norm(p - initiator) + np.linalg.norm(p - responder)
        assert total == pytest.approx(d_hat, abs=1e-9)


def test_reflection_point_preconditions():
    with pytest.raises(ReflectionGeometryError):
        reflection_point((0.1, 0.0), (-0.1, 0.0), 0.0, 0.15)
    assert issubclass(ReflectionGeometryError, ValueError)


def test_mmwave_point_accepts_mirror_fixture():
    point = mmwave_point(NORTH, RobotRig(), RangeEstimate(MIRROR_D_HAT, MIRROR_D_HAT / Config.SPEED_OF_LIGHT),
                         mirror_aoa(), event_time=2.5)
    assert point.accepted
    assert point.source is PointSource.MMWAVE
    assert point.event_time == 2.5
    assert np.allclose(point.xy, (0.0, 2.0), atol=1e-9)


@pytest.mark.parametrize("d_hat,azimuth,elevation,expected", [
    (4.0, 0.0, 12.0, PointQuality.REJECTED_ELEVATION),
    (8.1, 0.0, 0.0, PointQuality.REJECTED_RANGE),
    (0.25, 0.0, 0.0, PointQuality.REJECTED_RANGE),
    (4.0, 45.0, 0.0, PointQuality.REJECTED_RANGE),
    (4.0, -39.0, 4.0, PointQuality.ACCEPTED),
])
def test_gates(d_hat, azimuth, elevation, expected):
    range_estimate = RangeEstimate.from_tof(d_hat / Config.SPEED_OF_LIGHT)
    point = mmwave_point(NORTH, RobotRig(), range_estimate, aoa(azimuth, elevation))
    assert point.quality is expected


def test_power_gate_and_geometry_rejection():
    weak = aoa(0.0, gain=1e-6)
    gates = GateConfig(min_gain_db=-100.0)
    range_estimate = RangeEstimate.from_tof(4.0 / Config.SPEED_OF_LIGHT)
    assert mmwave_point(NORTH, RobotRig(), range_estimate, weak, gates).quality is PointQuality.REJECTED_GEOMETRY
    assert mmwave_point(NORTH, RobotRig(), range_estimate, weak).accepted
    too_short = RangeEstimate.from_tof(0.15 / Config.SPEED_OF_LIGHT)
    point = mmwave_point(NORTH, RobotRig(), too_short, aoa(), GateConfig(range_min=0.0))
    assert point.quality is PointQuality.REJECTED_GEOMETRY


def test_gate_order_is_immaterial():
    """Accepted exactly when every gate passes on its own"""
    rng = np.random.default_rng(11)
    gates = GateConfig()
    for _ in range(500):
        d_hat = rng.uniform(0.1, 9.0)
        est = aoa(rng.uniform(-60, 60), rng.uniform(-10, 10))
        quality = gate_quality(RangeEstimate.from_tof(d_hat / Config.SPEED_OF_LIGHT), est, gates)
        passes = (abs(est.elevation) <= gates.elevation_max
                  and gates.range_min <= d_hat <= gates.range_max
                  and abs(est.azimuth) <= gates.azimuth_max)
        assert (quality is PointQuality.ACCEPTED) == passes


def test_selection_glass_rule():
    point = mm_at(12.0, 3.2)
    out, state = select_points(scan_with({}), [point], SelectionState(), Pose(0.0, 0.0, 0.0))
    assert out == [point]
    sector = state.sector_of(math.radians(12.0))
    assert state.median(sector) == pytest.approx(3.2)


def test_selection_agreement_keeps_both():
    out, _ = select_points(scan_with({12: 2.0}), [mm_at(12.0, 2.08)], SelectionState(), Pose(0.0, 0.0, 0.0))
    assert [p.source for p in out] == [PointSource.LIDAR, PointSource.MMWAVE]
    assert all(p.accepted for p in out)
    assert np.allclose(out[0].xy, (2.0 * math.cos(math.radians(12)), 2.0 * math.sin(math.radians(12))))


def test_selection_disagreement_prefers_recent_median():
    state = SelectionState()
    sector = state.sector_of(math.radians(12.0))
    for r in (2.0, 2.01, 2.02):
        state.push(sector, PointSource.LIDAR, r)
    out, new_state = select_points(scan_with({12: 2.0}), [mm_at(12.0, 3.5)], state, Pose(0.0, 0.0, 0.0))
    lidar = next(p for p in out if p.source is PointSource.LIDAR)
    mm = next(p for p in out if p.source is PointSource.MMWAVE)
    assert lidar.accepted
    assert mm.quality is PointQuality.REJECTED_CONSISTENCY
    # the caller's state is untouched, the returned one holds the emitted LiDAR range
    assert len(state.buffers[(sector, "lidar")]) == 3
    assert len(new_state.buffers[(sector, "lidar")]) == 4


def test_selection_disagreement_can_reject_lidar():
    state = SelectionState()
    sector = state.sector_of(math.radians(12.0))
    for r in (3.5, 3.49, 3.51):
        state.push(sector, PointSource.MMWAVE, r)
    out, _ = select_points(scan_with({12: 2.0}), [mm_at(12.0, 3.5)], state, Pose(0.0, 0.0, 0.0))
    lidar = next(p for p in out if p.source is PointSource.LIDAR)
    assert lidar.quality is PointQuality.REJECTED_CONSISTENCY
    assert next(p for p in out if p.source is PointSource.MMWAVE).accepted


def test_selection_never_fabricates_points():
    mm = [mm_at(12.0, 3.5), mm_at(100.0, 1.0),
          PointEstimate((math.nan, math.nan), PointSource.MMWAVE, 1.0, PointQuality.REJECTED_RANGE)]
    scan = scan_with({12: 2.0, 40: 1.5})
    out, _ = select_points(scan, mm, SelectionState(), Pose(0.0, 0.0, 0.0))
    assert len(out) == int(scan.returns.sum()) + len(mm)
    assert [p.xy for p in out if p.source is PointSource.MMWAVE] == [p.xy for p in mm]


def test_selection_without_lidar_passes_gated_points():
    mm = [mm_at(0.0, 2.0), mm_at(200.0, 4.0)]
    out, _ = select_points(None, mm, SelectionState(), NORTH)
    assert out == mm


def test_selection_buffers_are_bounded():
    state = SelectionState(depth=3)
    for k in range(10):
        state.push(0, PointSource.LIDAR, float(k))
    assert list(state.buffers[(0, "lidar")]) == [7.0, 8.0, 9.0]
    assert state.sector_count == 72


def test_points_csv(tmp_path):
    points = [mm_at(0.0, 2.0, t=0.5),
              PointEstimate((math.nan, math.nan), PointSource.MMWAVE, 0.6, PointQuality.REJECTED_ELEVATION)]
    path = write_points_csv(points, tmp_path / "points.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == POINT_COLUMNS
    assert list(frame["quality"]) == ["accepted", "rejected_elevation"]


if __name__ == "__main__":
    print("🧪 Testing fusion")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-v"]))
