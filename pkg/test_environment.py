#!/usr/bin/env python3
"""
Tests for the simulated world: materials, poses, scenario files and ray queries
"""

import json
import math

import numpy as np
import pytest

from config import Config, ConfigError
from environment import (DEFAULT_MATERIALS, Material, Pose, RobotRig, Scenario, ScenarioError,
                         WallSegment, load_scenario, random_walk_route, raycast, raycast_batch,
                         save_scenario, scenario_from_dict, scenario_to_dict, wrap_angle)

BRICK = Material("brick", 7.0, True)
GLASS = Material("glass", 6.0, False)


def box(size=5.0, material=BRICK):
    corners = [(0.0, 0.0), (size, 0.0), (size, size), (0.0, size)]
    return tuple(WallSegment(a, b, material) for a, b in zip(corners, corners[1:] + corners[:1]))


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    for angle in np.linspace(-20, 20, 101):
        assert -math.pi < wrap_angle(angle) <= math.pi


def test_material_loss_bounds():
    with pytest.raises(ScenarioError):
        Material("weird", 61.0)
    with pytest.raises(ScenarioError):
        Material("weird", -1.0)
    assert Material("free", 0.0).amplitude_factor == 1.0
    assert {m.name for m in DEFAULT_MATERIALS} == {"brick", "glass", "metal", "absorber"}
    assert not next(m for m in DEFAULT_MATERIALS if m.name == "glass").lidar_opaque


def test_scenario_error_is_config_error():
    assert issubclass(ScenarioError, ConfigError)


def test_wall_rejects_zero_length_and_mirrors():
    with pytest.raises(ScenarioError):
        WallSegment((1.0, 1.0), (1.0, 1.0), BRICK)
    wall = WallSegment((0.0, 2.0), (4.0, 2.0), BRICK)
    assert np.allclose(wall.mirror((1.0, 0.5)), (1.0, 3.5))


def test_pose_transform_uses_forward_left_frame():
    pose = Pose(1.0, 2.0, math.pi / 2)
    # forward is +y in the world, left is -x
    assert np.allclose(pose.transform((1.0, 0.0)), (1.0, 3.0))
    assert np.allclose(pose.transform((0.0, 1.0)), (0.0, 2.0))
    assert Pose(0.0, 0.0, 2.5 * math.pi).theta == pytest.approx(math.pi / 2)


def test_rig_radio_positions_and_validation():
    rig = RobotRig()
    initiator, responder = rig.radio_positions(Pose(0.0, 0.0, 0.0))
    assert np.allclose(initiator, (0.0, 0.1))
    assert np.allclose(responder, (0.0, -0.1))
    with pytest.raises(ScenarioError):
        RobotRig(initiator_offset=(0.1, 0.0), responder_offset=(0.1, 0.0))


def test_scenario_validation():
    with pytest.raises(ScenarioError, match="duplicate"):
        Scenario(walls=(), materials=(BRICK, Material("brick", 3.0)))
    with pytest.raises(ScenarioError, match="undeclared material 'glass'"):
        Scenario(walls=(WallSegment((0, 0), (1, 0), GLASS),), materials=(BRICK,))
    with pytest.raises(ScenarioError, match="strictly increasing"):
        Scenario(walls=box(), materials=(BRICK,), route=((1.0, Pose(1, 1)), (1.0, Pose(2, 2))))


def test_scenario_from_dict_reports_field_path():
    data = {
        "waveslam_scenario": 1,
        "materials": [{"name": "brick", "reflection_loss_db": 7.0}],
        "walls": [{"a": [0, 0], "b": [1, 0], "material": "brick"},
                  {"a": [0, 0], "b": [0, 1], "material": "plaster"}],
    }
    with pytest.raises(ScenarioError, match=r"walls\[1\]\.material: undeclared material 'plaster'"):
        scenario_from_dict(data, "room.json")


def test_load_scenario_json_error_has_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "waveslam_scenario": 1,\n  "walls": [\n}\n', encoding="utf-8")
    with pytest.raises(ScenarioError, match=r"broken\.json:4:1"):
        load_scenario(path)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")


def test_scenario_save_load_preserves_everything(tmp_path):
    route = tuple((0.5 * k, Pose(1.0 + 0.1 * k, 2.0, math.radians(10 * k))) for k in range(6))
    scenario = Scenario(walls=box(), materials=(BRICK, GLASS), route=route, rng_seed=99, name="box")
    path = save_scenario(scenario, tmp_path / "box.json")
    loaded = load_scenario(path)
    assert loaded == scenario
    assert scenario_to_dict(loaded) == json.loads(path.read_text(encoding="utf-8"))


@pytest.mark.parametrize("name", ["square_room", "glass_corridor", "dark_corridor"])
def test_bundled_scenarios_load(name):
    scenario = load_scenario(Config.scenario_path(name))
    assert scenario.name == name
    assert scenario.walls and scenario.route
    times = [t for t, _ in scenario.route]
    assert all(b - a > 0.004 for a, b in zip(times, times[1:]))


def test_glass_corridor_has_glass_wall():
    scenario = load_scenario(Config.scenario_path("glass_corridor"))
    assert any(not w.material.lidar_opaque for w in scenario.walls)


def test_raycast_nearest_wall_and_filter():
    walls = (WallSegment((2.0, -1.0), (2.0, 1.0), GLASS), WallSegment((4.0, -1.0), (4.0, 1.0), BRICK))
    hit = raycast((0.0, 0.0), (1.0, 0.0), walls)
    assert hit.distance == pytest.approx(2.0)
    assert hit.wall.material is GLASS
    opaque = raycast((0.0, 0.0), (1.0, 0.0), walls, lambda m: m.lidar_opaque)
    assert opaque.distance == pytest.approx(4.0)
    assert raycast((0.0, 0.0), (-1.0, 0.0), walls) is None


def test_raycast_batch_matches_scalar():
    walls = box()
    origin = (1.3, 2.1)
    angles = np.linspace(0.0, 2 * math.pi, 73, endpoint=False)
    batch = raycast_batch(origin, angles, walls)
    for angle, distance in zip(angles, batch):
        hit = raycast(origin, (math.cos(angle), math.sin(angle)), walls)
        assert distance == pytest.approx(hit.distance)
    assert np.all(np.isinf(raycast_batch(origin, angles, walls, lambda m: False)))


def random_walls(rng, count=8):
    return tuple(WallSegment(tuple(rng.uniform(-5, 5, 2)), tuple(rng.uniform(-5, 5, 2)), BRICK)
                 for _ in range(count))


def test_raycast_follows_rigid_motion():
    rng = np.random.default_rng(12)
    hits = 0
    for _ in range(500):
        walls = random_walls(rng)
        origin = rng.uniform(-2, 2, 2)
        angle = rng.uniform(-math.pi, math.pi)
        direction = np.array([math.cos(angle), math.sin(angle)])
        phi = rng.uniform(-math.pi, math.pi)
        rotation = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        shift = rng.uniform(-10, 10, 2)

        def move(p):
            return rotation @ np.asarray(p, dtype=float) + shift

        moved_walls = tuple(WallSegment(tuple(move(w.a)), tuple(move(w.b)), w.material) for w in walls)
        hit = raycast(origin, direction, walls)
        moved = raycast(move(origin), rotation @ direction, moved_walls)
        if hit is None:
            assert moved is None
            continue
        hits += 1
        assert np.allclose(moved.point, move(hit.point), rtol=0.0, atol=1e-9)
        assert moved.distance == pytest.approx(hit.distance, abs=1e-9)
    assert hits > 100


def test_removing_walls_never_shortens_a_raycast():
    rng = np.random.default_rng(13)
    for _ in range(300):
        walls = random_walls(rng)
        origin = rng.uniform(-2, 2, 2)
        angle = rng.uniform(-math.pi, math.pi)
        direction = (math.cos(angle), math.sin(angle))
        keep = rng.random(len(walls)) < 0.5
        full = raycast(origin, direction, walls)
        fewer = raycast(origin, direction, tuple(w for w, k in zip(walls, keep) if k))
        full_distance = math.inf if full is None else full.distance
        fewer_distance = math.inf if fewer is None else fewer.distance
        assert fewer_distance >= full_distance
    angles = np.linspace(0.0, 2 * math.pi, 90, endpoint=False)
    walls = random_walls(rng)
    assert np.all(raycast_batch((0.0, 0.0), angles, walls[:4]) >= raycast_batch((0.0, 0.0), angles, walls))


def test_scenario_without_materials_uses_default_table():
    data = {"waveslam_scenario": 1, "walls": [{"a": [0, 0], "b": [1, 0], "material": "glass"}]}
    scenario = scenario_from_dict(data)
    assert scenario.materials == DEFAULT_MATERIALS
    assert not scenario.walls[0].material.lidar_opaque
    data["materials"] = [{"name": "brick", "reflection_loss_db": 7.0}]
    with pytest.raises(ScenarioError, match="undeclared material 'glass'"):
        scenario_from_dict(data)


def test_random_walk_is_seeded_and_stays_inside():
    scenario = Scenario(walls=box(), materials=(BRICK,), route=((0.0, Pose(2.5, 2.5, 0.0)),))
    a = random_walk_route(scenario, 300, np.random.default_rng(5))
    b = random_walk_route(scenario, 300, np.random.default_rng(5))
    assert a == b
    assert len(a) == 300
    for _, pose in a:
        assert 0.0 < pose.x < 5.0 and 0.0 < pose.y < 5.0
        assert math.degrees(pose.theta) == pytest.approx(round(math.degrees(pose.theta)), abs=1e-9)
    with pytest.raises(ScenarioError):
        random_walk_route(scenario, 0, np.random.default_rng(5))


if __name__ == "__main__":
    print("🧪 Testing environment")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-v"]))
