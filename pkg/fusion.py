"""
mmWave point estimation and LiDAR/mmWave point selection.

A first-order reflection P satisfies |P - I| + |P - R| = d_hat for the
initiator I, responder R and the FTM path length d_hat, so it lies on an
ellipse with foci I and R. The arrival bearing at R picks the point on that
ellipse: with u the unit bearing and B = I - R, P = R + r u where

    r = (d_hat^2 - |B|^2) / (2 (d_hat - u.B))
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Deque, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from aoa_estimator import PathEstimate
from config import Config
from environment import TWO_PI, Pose, RobotRig
from sensors import LidarScan

logger = logging.getLogger(__name__)


class PointSource(str, Enum):
    LIDAR = "lidar"
    MMWAVE = "mmwave"


class PointQuality(str, Enum):
    ACCEPTED = "accepted"
    REJECTED_ELEVATION = "rejected_elevation"
    REJECTED_RANGE = "rejected_range"
    REJECTED_GEOMETRY = "rejected_geometry"
    REJECTED_CONSISTENCY = "rejected_consistency"


class ReflectionGeometryError(ValueError):
    """Range/bearing pair that no first-order reflection can explain"""


@dataclass(frozen=True)
class RangeEstimate:
    distance_m: float
    tof_s: float

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"distance_m must be > 0, got {self.distance_m}")
        if abs(self.distance_m - Config.SPEED_OF_LIGHT * self.tof_s) > 1e-9:
            raise ValueError("distance_m must equal c * tof_s")

    @classmethod
    def from_tof(cls, tof_s: float) -> "RangeEstimate":
        return cls(distance_m=Config.SPEED_OF_LIGHT * tof_s, tof_s=tof_s)


@dataclass(frozen=True)
class PointEstimate:
    xy: Tuple[float, float]
    source: PointSource
    event_time: float
    quality: PointQuality = PointQuality.ACCEPTED

    def __post_init__(self):
        if self.quality is PointQuality.ACCEPTED and not all(math.isfinite(v) for v in self.xy):
            raise ValueError("accepted points need finite coordinates")

    @property
    def accepted(self) -> bool:
        return self.quality is PointQuality.ACCEPTED

    def relabel(self, quality: PointQuality) -> "PointEstimate":
        return PointEstimate(self.xy, self.source, self.event_time, quality)


_NOWHERE = (math.nan, math.nan)


@dataclass(frozen=True)
class GateConfig:
    elevation_max: float = math.radians(Config.GATE_ELEVATION_MAX_DEG)
    range_min: float = Config.GATE_RANGE_MIN_M
    range_max: float = Config.GATE_RANGE_MAX_M
    azimuth_max: float = math.radians(Config.GATE_AZIMUTH_MAX_DEG)
    min_gain_db: Optional[float] = Config.GATE_MIN_GAIN_DB


def reflection_point(responder_xy: Sequence[float], initiator_xy: Sequence[float],
                     world_bearing: float, d_hat: float) -> np.ndarray:
    """Bounce point on the initiator/responder ellipse along ``world_bearing`` from the responder"""
    r_xy = np.asarray(responder_xy, dtype=float)
    baseline = np.asarray(initiator_xy, dtype=float) - r_xy
    u = np.array([math.cos(world_bearing), math.sin(world_bearing)])
    b2 = float(baseline @ baseline)
    if not d_hat > math.sqrt(b2):
        raise ReflectionGeometryError(f"path length {d_hat:.4f} m not longer than baseline {math.sqrt(b2):.4f} m")
    denom = d_hat - float(u @ baseline)
    if not denom > 0:
        raise ReflectionGeometryError("bearing points along the baseline beyond the ellipse")
    r = (d_hat * d_hat - b2) / (2.0 * denom)
    return r_xy + r * u


def mmwave_point(odom_pose: Pose, rig: RobotRig, range_estimate: RangeEstimate, aoa: PathEstimate,
                 gates: GateConfig = GateConfig(), event_time: float = 0.0) -> PointEstimate:
    """Gate an (FTM range, AoA) pair and place its reflection point in the world"""
    quality = gate_quality(range_estimate, aoa, gates)
    if quality is not PointQuality.ACCEPTED:
        return PointEstimate(_NOWHERE, PointSource.MMWAVE, event_time, quality)
    initiator, responder = rig.radio_positions(odom_pose)
    bearing = odom_pose.theta + rig.array_boresight + aoa.azimuth
    try:
        xy = reflection_point(responder, initiator, bearing, range_estimate.distance_m)
    except ReflectionGeometryError as exc:
        logger.debug("t=%.3f rejected geometry: %s", event_time, exc)
        return PointEstimate(_NOWHERE, PointSource.MMWAVE, event_time, PointQuality.REJECTED_GEOMETRY)
    return PointEstimate((float(xy[0]), float(xy[1])), PointSource.MMWAVE, event_time)


def gate_quality(range_estimate: RangeEstimate, aoa: PathEstimate, gates: GateConfig) -> PointQuality:
    """First failing gate, or ACCEPTED. The gates are independent predicates."""
    if abs(aoa.elevation) > gates.elevation_max:
        return PointQuality.REJECTED_ELEVATION
    if not gates.range_min <= range_estimate.distance_m <= gates.range_max:
        return PointQuality.REJECTED_RANGE
    if abs(aoa.azimuth) > gates.azimuth_max:
        return PointQuality.REJECTED_RANGE
    if gates.min_gain_db is not None and aoa.gain_db < gates.min_gain_db:
        return PointQuality.REJECTED_GEOMETRY
    return PointQuality.ACCEPTED


# ------------------------------------------------------------ point selection

@dataclass
class SelectionState:
    sector_width: float = math.radians(Config.SELECTION_SECTOR_DEG)
    depth: int = Config.SELECTION_DEPTH
    disagreement_threshold_m: float = Config.SELECTION_DISAGREEMENT_M
    buffers: Dict[Tuple[int, str], Deque[float]] = field(default_factory=dict)

    @property
    def sector_count(self) -> int:
        return int(math.ceil(TWO_PI / self.sector_width - 1e-9))

    def sector_of(self, bearing: float) -> int:
        return int((bearing % TWO_PI) // self.sector_width) % self.sector_count

    def push(self, sector: int, source: PointSource, range_m: float) -> None:
        key = (sector, PointSource(source).value)
        if key not in self.buffers:
            self.buffers[key] = deque(maxlen=self.depth)
        self.buffers[key].append(float(range_m))

    def median(self, sector: int) -> Optional[float]:
        """Median of both sources' recent ranges in a sector"""
        values = [v for source in PointSource for v in self.buffers.get((sector, source.value), ())]
        return float(np.median(values)) if values else None

    def copy(self) -> "SelectionState":
        return SelectionState(self.sector_width, self.depth, self.disagreement_threshold_m,
                              {k: deque(v, maxlen=self.depth) for k, v in self.buffers.items()})


def select_points(lidar_scan: Optional[LidarScan], mmwave_points: Sequence[PointEstimate],
                  state: SelectionState, odom_pose: Pose,
                  lidar_offset: Sequence[float] = (0.0, 0.0),
                  event_time: float = 0.0) -> Tuple[List[PointEstimate], SelectionState]:
    """Decide per sector which source to trust.

    (a) LiDAR has no echo where a mmWave point sits: keep the mmWave point.
    (b) Both present and within the disagreement threshold: keep both.
    (c) Otherwise keep whichever range is closer to the sector's recent median
        and mark the other rejected_consistency.

    Returns every input point (LiDAR echoes become points) with its quality
    set, and the updated copy of ``state``.
    """
    new_state = state.copy()
    origin = odom_pose.transform(lidar_offset)
    lidar_quality: Dict[int, PointQuality] = {}
    emitted: List[Tuple[int, PointSource, float]] = []
    out_mm: List[PointEstimate] = []

    for point in mmwave_points:
        if not point.accepted:
            out_mm.append(point)
            continue
        rel = np.asarray(point.xy) - origin
        mm_range = float(np.hypot(rel[0], rel[1]))
        bearing = (math.atan2(rel[1], rel[0]) - odom_pose.theta) % TWO_PI
        sector = state.sector_of(bearing)
        beam = lidar_scan.beam_index(bearing) if lidar_scan is not None else None
        lidar_range = float(lidar_scan.ranges[beam]) if beam is not None else math.inf

        if not math.isfinite(lidar_range):
            out_mm.append(point)
            emitted.append((sector, PointSource.MMWAVE, mm_range))
        elif abs(lidar_range - mm_range) <= state.disagreement_threshold_m:
            out_mm.append(point)
            emitted.append((sector, PointSource.MMWAVE, mm_range))
        else:
            reference = state.median(sector)
            if reference is None or abs(lidar_range - reference) <= abs(mm_range - reference):
                out_mm.append(point.relabel(PointQuality.REJECTED_CONSISTENCY))
            else:
                out_mm.append(point)
                emitted.append((sector, PointSource.MMWAVE, mm_range))
                lidar_quality[beam] = PointQuality.REJECTED_CONSISTENCY

    out_lidar: List[PointEstimate] = []
    if lidar_scan is not None:
        echoes = lidar_scan.world_points(odom_pose, lidar_offset)
        for beam, echo in zip(np.flatnonzero(lidar_scan.returns), echoes):
            bearing = float(lidar_scan.bearings[beam])
            r = float(lidar_scan.ranges[beam])
            xy = (float(echo[0]), float(echo[1]))
            quality = lidar_quality.get(int(beam), PointQuality.ACCEPTED)
            out_lidar.append(PointEstimate(xy, PointSource.LIDAR, event_time, quality))
            if quality is PointQuality.ACCEPTED:
                emitted.append((state.sector_of(bearing), PointSource.LIDAR, r))

    for sector, source, r in emitted:
        new_state.push(sector, source, r)
    return out_lidar + out_mm, new_state


# ------------------------------------------------------------ points log

POINT_COLUMNS = ["t", "source", "x", "y", "quality"]


def points_frame(points: Sequence[PointEstimate]) -> pd.DataFrame:
    return pd.DataFrame({
        "t": [p.event_time for p in points],
        "source": [p.source.value for p in points],
        "x": [p.xy[0] for p in points],
        "y": [p.xy[1] for p in points],
        "quality": [p.quality.value for p in points],
    }, columns=POINT_COLUMNS)


def write_points_csv(points: Sequence[PointEstimate], path: Union[str, Path]) -> Path:
    path = Path(path)
    points_frame(points).to_csv(path, index=False)
    return path
