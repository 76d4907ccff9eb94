"""
LiDAR sweep and wheel odometry simulation, plus the JSONL sensor log.

Sensor log format (one JSON object per line, keys sorted)::

    {"v": 1, "type": "odom",  "t": ..., "event": k, "x": ..., "y": ..., "theta_rad": ...}
    {"v": 1, "type": "lidar", "t": ..., "event": k, "angular_step": ..., "max_range": ...,
     "sigma": ..., "ranges": [r0, r1, null, ...]}          # null = no return
    {"v": 1, "type": "ftm",   "t": ..., "event": k, "n": ..., "t1": [...], ...}
    {"v": 1, "type": "csi",   "t": ..., "event": k, "k": 6, "j": 6, "payload": "<base64>"}

``t`` is strictly increasing over the whole file; records of one route event
are spread by 1 ms per type in the order above.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from config import Config
from environment import TWO_PI, Pose, RoutePoint, Scenario, raycast_batch, wrap_angle

logger = logging.getLogger(__name__)

NO_RETURN = math.inf
SENSOR_LOG_VERSION = 1
RECORD_TYPES = ("odom", "lidar", "ftm", "csi")
TYPE_OFFSET_S = {"odom": 0.0, "lidar": 0.001, "ftm": 0.002, "csi": 0.003}


@dataclass(frozen=True, eq=False)
class LidarScan:
    pose_truth: Optional[Pose]
    bearings: np.ndarray
    ranges: np.ndarray
    max_range: float
    sigma: float

    @property
    def angular_step(self) -> float:
        return TWO_PI / len(self.bearings)

    @property
    def returns(self) -> np.ndarray:
        """Mask of bearings with an echo"""
        return np.isfinite(self.ranges)

    def beam_index(self, bearing: float) -> int:
        """Index of the beam closest to a robot-frame bearing"""
        return int(round((bearing % TWO_PI) / self.angular_step)) % len(self.bearings)

    def world_points(self, pose: Pose, lidar_offset: Sequence[float] = (0.0, 0.0)) -> np.ndarray:
        """(N, 2) world points of the returns, placed with ``pose`` (usually odometry)"""
        origin = pose.transform(lidar_offset)
        mask = self.returns
        angles = pose.theta + self.bearings[mask]
        r = self.ranges[mask]
        return np.stack([origin[0] + r * np.cos(angles), origin[1] + r * np.sin(angles)], axis=-1)


@dataclass(frozen=True)
class OdometryNoise:
    sigma_xy_per_m: float = 0.0
    sigma_theta_per_rad: float = 0.0

    def __post_init__(self):
        if self.sigma_xy_per_m < 0 or self.sigma_theta_per_rad < 0:
            raise ValueError("odometry noise must be >= 0")


@dataclass(frozen=True)
class OdometryTrack:
    poses: tuple
    noise: OdometryNoise


def lidar_bearings(angular_step: float) -> np.ndarray:
    count = int(round(TWO_PI / angular_step))
    if count < 1 or abs(count * angular_step - TWO_PI) > 1e-9:
        raise ValueError(f"angular_step {angular_step} does not divide 2*pi")
    return np.arange(count) * (TWO_PI / count)


def simulate_lidar(pose: Pose, scenario: Scenario, angular_step: float = math.radians(Config.LIDAR_ANGULAR_STEP_DEG),
                   rng: Optional[np.random.Generator] = None, max_range: float = Config.LIDAR_MAX_RANGE_M,
                   sigma: float = Config.LIDAR_SIGMA_M, dropout_prob: float = 0.0) -> LidarScan:
    """One 360 deg sweep from the true pose; glass and out-of-range bearings give NO_RETURN"""
    if not 0.0 <= dropout_prob <= 1.0:
        raise ValueError(f"dropout_prob must be in [0, 1], got {dropout_prob}")
    if rng is None:
        rng = np.random.default_rng()
    bearings = lidar_bearings(angular_step)
    origin = pose.transform(scenario.rig.lidar_offset)
    truth = raycast_batch(origin, pose.theta + bearings, scenario.walls, lambda m: m.lidar_opaque)

    noise = rng.normal(0.0, sigma, len(bearings))
    dropped = rng.random(len(bearings)) < dropout_prob
    hit = np.isfinite(truth) & (truth <= max_range) & ~dropped
    measured = np.clip(truth + noise, 1e-6, max_range)
    ranges = np.where(hit, measured, NO_RETURN)
    return LidarScan(pose_truth=pose, bearings=bearings, ranges=ranges, max_range=max_range, sigma=sigma)


def simulate_odometry(route: Sequence[RoutePoint], noise: OdometryNoise,
                      rng: Optional[np.random.Generator] = None) -> OdometryTrack:
    """Dead-reckoned belief along a route.

    Each step's local translation and rotation get Gaussian noise proportional
    to the distance travelled and the angle turned; the error accumulates.
    """
    if not route:
        raise ValueError("route must not be empty")
    if rng is None:
        rng = np.random.default_rng()
    error_xy = np.zeros(2)
    error_theta = 0.0
    poses = [(route[0][0], route[0][1])]
    for (_, prev), (t, cur) in zip(route, route[1:]):
        c, s = math.cos(prev.theta), math.sin(prev.theta)
        dx, dy = cur.x - prev.x, cur.y - prev.y
        local = np.array([c * dx + s * dy, -s * dx + c * dy])
        turn = wrap_angle(cur.theta - prev.theta)
        step = math.hypot(dx, dy)
        n_xy = rng.normal(0.0, noise.sigma_xy_per_m * step, 2)
        n_theta = float(rng.normal(0.0, noise.sigma_theta_per_rad * abs(turn)))

        belief_theta = prev.theta + error_theta
        cb, sb = math.cos(belief_theta), math.sin(belief_theta)
        rot_belief = np.array([[cb, -sb], [sb, cb]])
        rot_true = np.array([[c, -s], [s, c]])
        error_xy = error_xy + rot_belief @ (local + n_xy) - rot_true @ local
        error_theta += n_theta
        poses.append((t, Pose(cur.x + float(error_xy[0]), cur.y + float(error_xy[1]),
                              cur.theta + error_theta)))
    return OdometryTrack(poses=tuple(poses), noise=noise)


# ------------------------------------------------------------ sensor log

def odom_record(t: float, pose: Pose, event: int) -> Dict:
    return {"type": "odom", "t": t, "event": event, "x": pose.x, "y": pose.y, "theta_rad": pose.theta}


def lidar_record(t: float, scan: LidarScan, event: int) -> Dict:
    return {
        "type": "lidar", "t": t, "event": event,
        "angular_step": scan.angular_step, "max_range": scan.max_range, "sigma": scan.sigma,
        "ranges": [float(r) if math.isfinite(r) else None for r in scan.ranges],
    }


def pose_from_record(record: Dict) -> Pose:
    return Pose(float(record["x"]), float(record["y"]), float(record["theta_rad"]))


def scan_from_record(record: Dict) -> LidarScan:
    ranges = np.array([NO_RETURN if r is None else float(r) for r in record["ranges"]])
    bearings = np.arange(len(ranges)) * (TWO_PI / len(ranges))
    return LidarScan(pose_truth=None, bearings=bearings, ranges=ranges,
                     max_range=float(record["max_range"]), sigma=float(record["sigma"]))


def event_time(route_t: float, record_type: str) -> float:
    return route_t + TYPE_OFFSET_S[record_type]


def write_sensor_log(path: Union[str, Path], records: Iterable[Dict]) -> int:
    """Write records as JSONL; ``t`` must be strictly increasing"""
    path = Path(path)
    count = 0
    last_t = -math.inf
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            if record["type"] not in RECORD_TYPES:
                raise ValueError(f"unknown sensor record type '{record['type']}'")
            if not record["t"] > last_t:
                raise ValueError(f"sensor log time {record['t']} not after {last_t}")
            last_t = record["t"]
            handle.write(json.dumps({"v": SENSOR_LOG_VERSION, **record}, sort_keys=True,
                                    separators=(",", ":"), allow_nan=False))
            handle.write("\n")
            count += 1
    logger.info("wrote %d sensor records to %s", count, path)
    return count


def read_sensor_log(path: Union[str, Path]) -> List[Dict]:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc.msg}") from exc
            if record.get("v") != SENSOR_LOG_VERSION:
                raise ValueError(f"{path}:{lineno}: unsupported sensor log version {record.get('v')}")
            if record.get("type") not in RECORD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown record type {record.get('type')!r}")
            records.append(record)
    return records
