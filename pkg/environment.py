"""
Simulated world for waveslam.

Holds the wall geometry, wall materials, the robot's sensor mounting and the
scripted route, loads and saves scenario files, and answers ray queries for
the LiDAR simulator and the radio ray tracer.

Scenario files are UTF-8 JSON with a ``"waveslam_scenario": 1`` version
field. Lengths are metres; angles are degrees on disk and radians in memory::

    {
      "waveslam_scenario": 1,
      "name": "square_room",
      "seed": 7,
      "materials": [{"name": "brick", "reflection_loss_db": 7.0, "lidar_opaque": true}],
      "walls": [{"a": [0.0, 0.0], "b": [5.0, 0.0], "material": "brick"}],
      "rig": {"lidar_offset": [0.0, 0.0], "initiator_offset": [0.0, 0.1],
              "responder_offset": [0.0, -0.1], "array_boresight_deg": 0.0,
              "direct_path_blocked": true},
      "route": [{"t": 0.0, "x": 2.5, "y": 2.5, "theta_deg": 90.0}]
    }
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from config import ConfigError

logger = logging.getLogger(__name__)

SCENARIO_VERSION = 1
TWO_PI = 2.0 * math.pi

Point2 = Tuple[float, float]


class ScenarioError(ConfigError):
    """Scenario file or scenario object failed validation"""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]"""
    wrapped = math.remainder(angle, TWO_PI)
    return math.pi if wrapped <= -math.pi else wrapped


@dataclass(frozen=True)
class Material:
    name: str
    reflection_loss_db: float
    lidar_opaque: bool = True

    def __post_init__(self):
        if not 0.0 <= self.reflection_loss_db <= 60.0:
            raise ScenarioError(
                f"material '{self.name}': reflection_loss_db {self.reflection_loss_db} outside [0, 60]"
            )

    @property
    def amplitude_factor(self) -> float:
        """Linear amplitude kept after one bounce"""
        return 10.0 ** (-self.reflection_loss_db / 20.0)


# Used when a scenario file declares no materials; the glass entry is what makes LiDAR blind.
DEFAULT_MATERIALS = (
    Material("brick", 7.0, True),
    Material("glass", 6.0, False),
    Material("metal", 5.0, True),
    Material("absorber", 60.0, True),
)


@dataclass(frozen=True)
class WallSegment:
    a: Point2
    b: Point2
    material: Material

    def __post_init__(self):
        if math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]) <= 0.0:
            raise ScenarioError(f"wall {self.a} -> {self.b} has zero length")

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def mirror(self, point: Sequence[float]) -> np.ndarray:
        """Mirror a point across the wall's supporting line"""
        a = np.asarray(self.a, dtype=float)
        d = np.asarray(self.b, dtype=float) - a
        d /= np.linalg.norm(d)
        rel = np.asarray(point, dtype=float) - a
        foot = a + d * np.dot(rel, d)
        return 2.0 * foot - np.asarray(point, dtype=float)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not -math.pi < self.theta <= math.pi:
            object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def transform(self, offset: Sequence[float]) -> np.ndarray:
        """Map a robot-frame offset (x forward, y left) into the world frame"""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([self.x + c * offset[0] - s * offset[1],
                         self.y + s * offset[0] + c * offset[1]])


@dataclass(frozen=True)
class RobotRig:
    lidar_offset: Point2 = (0.0, 0.0)
    initiator_offset: Point2 = (0.0, 0.1)
    responder_offset: Point2 = (0.0, -0.1)
    array_boresight: float = 0.0
    direct_path_blocked: bool = True

    def __post_init__(self):
        if tuple(self.initiator_offset) == tuple(self.responder_offset):
            raise ScenarioError("rig: initiator_offset and responder_offset must differ")

    def radio_positions(self, pose: Pose) -> Tuple[np.ndarray, np.ndarray]:
        """World positions of (initiator, responder) for a robot pose"""
        return pose.transform(self.initiator_offset), pose.transform(self.responder_offset)

    def boresight(self, pose: Pose) -> float:
        """World direction of the shared array boresight"""
        return wrap_angle(pose.theta + self.array_boresight)


RoutePoint = Tuple[float, Pose]


@dataclass(frozen=True)
class Scenario:
    walls: Tuple[WallSegment, ...]
    materials: Tuple[Material, ...]
    rig: RobotRig = field(default_factory=RobotRig)
    route: Tuple[RoutePoint, ...] = ()
    rng_seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(self, "route", tuple(self.route))
        names = [m.name for m in self.materials]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ScenarioError(f"materials: duplicate name(s) {', '.join(duplicates)}")
        for index, wall in enumerate(self.walls):
            if wall.material not in self.materials:
                raise ScenarioError(
                    f"walls[{index}].material: undeclared material '{wall.material.name}'"
                )
        for index in range(1, len(self.route)):
            if not self.route[index][0] > self.route[index - 1][0]:
                raise ScenarioError(f"route[{index}].t: times must be strictly increasing")

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """(min_xy, max_xy) over wall endpoints and route positions"""
        points = [w.a for w in self.walls] + [w.b for w in self.walls]
        points += [(p.x, p.y) for _, p in self.route]
        if not points:
            return np.zeros(2), np.zeros(2)
        arr = np.asarray(points, dtype=float)
        return arr.min(axis=0), arr.max(axis=0)

    def with_route(self, route: Sequence[RoutePoint]) -> "Scenario":
        return replace(self, route=tuple(route))


class RayHit(NamedTuple):
    point: np.ndarray
    distance: float
    wall: WallSegment


def _all(_: Material) -> bool:
    return True


def raycast(origin: Sequence[float], direction: Sequence[float], walls: Sequence[WallSegment],
            opaque_filter: Callable[[Material], bool] = _all) -> Optional[RayHit]:
    """Nearest intersection of a ray with the walls passing ``opaque_filter``"""
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = float(direction[0]), float(direction[1])
    best: Optional[RayHit] = None
    for wall in walls:
        if not opaque_filter(wall.material):
            continue
        ex, ey = wall.b[0] - wall.a[0], wall.b[1] - wall.a[1]
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-15:
            continue
        wx, wy = wall.a[0] - ox, wall.a[1] - oy
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
        if t <= 1e-12 or s < 0.0 or s > 1.0:
            continue
        if best is None or t < best.distance:
            best = RayHit(np.array([ox + t * dx, oy + t * dy]), t, wall)
    return best


def wall_arrays(walls: Sequence[WallSegment]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack wall endpoints as (N, 2) arrays"""
    if not walls:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return (np.array([w.a for w in walls], dtype=float),
            np.array([w.b for w in walls], dtype=float))


def raycast_batch(origin: Sequence[float], angles: np.ndarray, walls: Sequence[WallSegment],
                  opaque_filter: Callable[[Material], bool] = _all) -> np.ndarray:
    """Vectorized raycast: distance per ray angle, ``inf`` where nothing is hit"""
    angles = np.asarray(angles, dtype=float)
    selected = [w for w in walls if opaque_filter(w.material)]
    if not selected:
        return np.full(angles.shape, np.inf)
    a, b = wall_arrays(selected)
    d = np.stack([np.cos(angles), np.sin(angles)], axis=-1)[:, None, :]
    e = (b - a)[None, :, :]
    w = (a - np.asarray(origin, dtype=float))[None, :, :]
    denom = d[..., 0] * e[..., 1] - d[..., 1] * e[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[..., 0] * e[..., 1] - w[..., 1] * e[..., 0]) / denom
        s = (w[..., 0] * d[..., 1] - w[..., 1] * d[..., 0]) / denom
    valid = (np.abs(denom) >= 1e-15) & (t > 1e-12) & (s >= 0.0) & (s <= 1.0)
    return np.where(valid, t, np.inf).min(axis=1)


def random_walk_route(scenario: Scenario, steps: int, rng: np.random.Generator,
                      step_m: float = 0.1, dt_s: float = 0.1, clearance_m: float = 0.6,
                      start: Optional[Pose] = None) -> List[RoutePoint]:
    """Seeded random walk that turns away from walls closer than ``clearance_m``.

    Headings are whole degrees so the route survives a scenario save/load.
    """
    if steps < 1:
        raise ScenarioError("random walk needs at least one step")
    if start is None:
        if not scenario.route:
            lo, hi = scenario.bounding_box()
            mid = (lo + hi) / 2.0
            start = Pose(float(mid[0]), float(mid[1]), 0.0)
        else:
            start = scenario.route[0][1]
    heading_deg = int(round(math.degrees(start.theta)))
    x, y = start.x, start.y
    route: List[RoutePoint] = [(0.0, Pose(x, y, math.radians(_wrap_deg(heading_deg))))]
    for k in range(1, steps):
        heading_deg = _wrap_deg(heading_deg + int(rng.integers(-15, 16)))
        theta = math.radians(heading_deg)
        ahead = raycast_batch((x, y), np.array([theta]), scenario.walls)[0]
        if ahead > clearance_m + step_m:
            x, y = x + step_m * math.cos(theta), y + step_m * math.sin(theta)
        else:
            heading_deg = _wrap_deg(heading_deg + int(rng.integers(90, 271)))
            theta = math.radians(heading_deg)
        route.append((round(k * dt_s, 9), Pose(x, y, theta)))
    logger.debug("random walk: %d poses from (%.2f, %.2f)", len(route), start.x, start.y)
    return route


def _wrap_deg(deg: int) -> int:
    deg = deg % 360
    return deg - 360 if deg > 180 else deg


# ---------------------------------------------------------------- file I/O

def _point(value, where: str) -> Point2:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"{where}: expected [x, y]")
    try:
        return (float(value[0]), float(value[1]))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def _require(data: Dict, key: str, where: str):
    if key not in data:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return data[key]


def scenario_from_dict(data: Dict, source: str = "<scenario>") -> Scenario:
    """Build and validate a Scenario from parsed JSON"""
    try:
        version = _require(data, "waveslam_scenario", source)
        if version != SCENARIO_VERSION:
            raise ScenarioError(f"{source}: unsupported waveslam_scenario version {version}")

        materials = [] if "materials" in data else list(DEFAULT_MATERIALS)
        for i, m in enumerate(data.get("materials", [])):
            where = f"{source}: materials[{i}]"
            materials.append(Material(
                name=str(_require(m, "name", where)),
                reflection_loss_db=float(_require(m, "reflection_loss_db", where)),
                lidar_opaque=bool(m.get("lidar_opaque", True)),
            ))
        by_name = {m.name: m for m in materials}

        walls = []
        for i, w in enumerate(_require(data, "walls", source)):
            where = f"{source}: walls[{i}]"
            name = _require(w, "material", where)
            if name not in by_name:
                raise ScenarioError(f"{where}.material: undeclared material '{name}'")
            walls.append(WallSegment(_point(_require(w, "a", where), f"{where}.a"),
                                     _point(_require(w, "b", where), f"{where}.b"),
                                     by_name[name]))

        r = data.get("rig", {})
        rig_defaults = RobotRig()
        rig = RobotRig(
            lidar_offset=_point(r.get("lidar_offset", rig_defaults.lidar_offset), f"{source}: rig.lidar_offset"),
            initiator_offset=_point(r.get("initiator_offset", rig_defaults.initiator_offset),
                                    f"{source}: rig.initiator_offset"),
            responder_offset=_point(r.get("responder_offset", rig_defaults.responder_offset),
                                    f"{source}: rig.responder_offset"),
            array_boresight=math.radians(float(r.get("array_boresight_deg", 0.0))),
            direct_path_blocked=bool(r.get("direct_path_blocked", True)),
        )

        route = []
        for i, p in enumerate(data.get("route", [])):
            where = f"{source}: route[{i}]"
            route.append((float(_require(p, "t", where)),
                          Pose(float(_require(p, "x", where)), float(_require(p, "y", where)),
                               math.radians(float(p.get("theta_deg", 0.0))))))
        for i in range(1, len(route)):
            if not route[i][0] > route[i - 1][0]:
                raise ScenarioError(f"{source}: route[{i}].t: times must be strictly increasing")

        return Scenario(walls=tuple(walls), materials=tuple(materials), rig=rig, route=tuple(route),
                        rng_seed=int(data.get("seed", 0)), name=str(data.get("name", "scenario")))
    except ScenarioError:
        raise
    except (TypeError, ValueError, AttributeError) as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load and validate a scenario file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    data.setdefault("name", path.stem)
    scenario = scenario_from_dict(data, str(path))
    logger.info("loaded scenario '%s': %d walls, %d route poses",
                scenario.name, len(scenario.walls), len(scenario.route))
    return scenario


def _deg(rad: float) -> float:
    return round(math.degrees(rad), 12)


def scenario_to_dict(scenario: Scenario) -> Dict:
    return {
        "waveslam_scenario": SCENARIO_VERSION,
        "name": scenario.name,
        "seed": scenario.rng_seed,
        "materials": [
            {"name": m.name, "reflection_loss_db": m.reflection_loss_db, "lidar_opaque": m.lidar_opaque}
            for m in scenario.materials
        ],
        "walls": [
            {"a": list(w.a), "b": list(w.b), "material": w.material.name} for w in scenario.walls
        ],
        "rig": {
            "lidar_offset": list(scenario.rig.lidar_offset),
            "initiator_offset": list(scenario.rig.initiator_offset),
            "responder_offset": list(scenario.rig.responder_offset),
            "array_boresight_deg": _deg(scenario.rig.array_boresight),
            "direct_path_blocked": scenario.rig.direct_path_blocked,
        },
        "route": [
            {"t": t, "x": p.x, "y": p.y, "theta_deg": _deg(p.theta)} for t, p in scenario.route
        ],
    }


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(scenario_to_json(scenario), encoding="utf-8")
    return path
