"""
Log-odds occupancy grid built from selected points at odometry poses.

LiDAR points carve free space along the beam and mark the endpoint occupied;
mmWave points only mark their endpoint. The grid origin is offset by half a
cell so coordinates on the resolution lattice fall on cell centers.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from PIL import Image

from config import Config
from environment import Scenario, WallSegment
from fusion import PointEstimate, PointSource

logger = logging.getLogger(__name__)

PGM_FREE = 255
PGM_OCCUPIED = 0
PGM_UNKNOWN = 127


@dataclass
class OccupancyGrid:
    resolution_m: float
    origin: Tuple[float, float]
    cells: np.ndarray
    clamp: float = Config.GRID_CLAMP
    l_occ: float = Config.GRID_L_OCC
    l_free: float = Config.GRID_L_FREE
    dropped_points: int = 0

    @classmethod
    def for_scenario(cls, scenario: Scenario, resolution_m: float = Config.GRID_RESOLUTION_M,
                     margin_m: float = Config.GRID_MARGIN_M) -> "OccupancyGrid":
        """Empty grid over the scenario bounding box plus a margin"""
        lo, hi = scenario.bounding_box()
        origin = (float(lo[0] - margin_m - resolution_m / 2.0), float(lo[1] - margin_m - resolution_m / 2.0))
        nx = int(math.ceil((hi[0] - lo[0] + 2.0 * margin_m) / resolution_m)) + 1
        ny = int(math.ceil((hi[1] - lo[1] + 2.0 * margin_m) / resolution_m)) + 1
        return cls(resolution_m=resolution_m, origin=origin, cells=np.zeros((ny, nx)))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape

    def cell_of(self, xy: Sequence[float]) -> Tuple[int, int]:
        """(row, col) of a world point; may be outside the grid"""
        col = int(math.floor((xy[0] - self.origin[0]) / self.resolution_m))
        row = int(math.floor((xy[1] - self.origin[1]) / self.resolution_m))
        return row, col

    def contains(self, row: int, col: int) -> bool:
        return 0 <= row < self.cells.shape[0] and 0 <= col < self.cells.shape[1]

    def _add(self, rows: np.ndarray, cols: np.ndarray, delta: float) -> None:
        current = self.cells[rows, cols]
        self.cells[rows, cols] = np.clip(current + delta, -self.clamp, self.clamp)


def bresenham(r0: int, c0: int, r1: int, c1: int) -> List[Tuple[int, int]]:
    """Integer cells on the line between two cells, both ends included"""
    cells = []
    dr, dc = abs(r1 - r0), -abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr + dc
    r, c = r0, c0
    while True:
        cells.append((r, c))
        if r == r1 and c == c1:
            return cells
        e2 = 2 * err
        if e2 >= dc:
            err += dc
            r += sr
        if e2 <= dr:
            err += dr
            c += sc


def integrate_point(grid: OccupancyGrid, robot_xy: Sequence[float], point: PointEstimate) -> OccupancyGrid:
    """Add one accepted point to the grid (in place) and return it"""
    if not point.accepted:
        raise ValueError(f"only accepted points are integrated, got {point.quality.value}")
    end = grid.cell_of(point.xy)
    if not grid.contains(*end):
        grid.dropped_points += 1
        return grid
    if point.source is PointSource.LIDAR:
        start = grid.cell_of(robot_xy)
        free = [cell for cell in bresenham(*start, *end)[1:-1] if grid.contains(*cell)]
        if free:
            rows, cols = np.array(free).T
            grid._add(rows, cols, grid.l_free)
    grid._add(np.array([end[0]]), np.array([end[1]]), grid.l_occ)
    return grid


def integrate_points(grid: OccupancyGrid, robot_xy: Sequence[float],
                     points: Sequence[PointEstimate]) -> OccupancyGrid:
    """Fold accepted points into the grid in order; rejected points are skipped"""
    for point in points:
        if point.accepted:
            integrate_point(grid, robot_xy, point)
    return grid


# ------------------------------------------------------------ scoring

@dataclass(frozen=True)
class MapMetrics:
    iou: float
    glass_coverage: float
    point_count: Dict[str, int] = field(default_factory=dict)

    def as_row(self) -> Dict[str, float]:
        row = {"iou": self.iou, "glass_coverage": self.glass_coverage}
        for source in PointSource:
            row[f"{source.value}_points"] = self.point_count.get(source.value, 0)
        return row


def rasterize_walls(grid: OccupancyGrid, walls: Sequence[WallSegment]) -> np.ndarray:
    """Boolean mask of cells touched by the walls, sampled every quarter cell"""
    mask = np.zeros(grid.shape, dtype=bool)
    for wall in walls:
        samples = max(int(math.ceil(wall.length / (grid.resolution_m / 4.0))), 1) + 1
        s = np.linspace(0.0, 1.0, samples)
        xs = wall.a[0] + s * (wall.b[0] - wall.a[0])
        ys = wall.a[1] + s * (wall.b[1] - wall.a[1])
        cols = np.floor((xs - grid.origin[0]) / grid.resolution_m).astype(int)
        rows = np.floor((ys - grid.origin[1]) / grid.resolution_m).astype(int)
        inside = (rows >= 0) & (rows < grid.shape[0]) & (cols >= 0) & (cols < grid.shape[1])
        mask[rows[inside], cols[inside]] = True
    return mask


def score_map(grid: OccupancyGrid, scenario: Scenario, occ_threshold: float = 0.0,
              point_count: Optional[Dict[str, int]] = None) -> MapMetrics:
    """IoU of occupied cells against rasterized walls, and glass-wall coverage"""
    truth = rasterize_walls(grid, scenario.walls)
    if not truth.any():
        raise ValueError(f"scenario '{scenario.name}' has no wall cells inside the grid")
    occupied = grid.cells > occ_threshold
    union = np.count_nonzero(occupied | truth)
    iou = np.count_nonzero(occupied & truth) / union
    glass = rasterize_walls(grid, [w for w in scenario.walls if not w.material.lidar_opaque])
    glass_cells = np.count_nonzero(glass)
    coverage = np.count_nonzero(occupied & glass) / glass_cells if glass_cells else 0.0
    return MapMetrics(iou=float(iou), glass_coverage=float(coverage), point_count=dict(point_count or {}))


def write_metrics_csv(metrics: MapMetrics, path: Union[str, Path], dropped_points: int = 0) -> Path:
    path = Path(path)
    row = metrics.as_row()
    row["dropped_points"] = dropped_points
    pd.DataFrame([row]).to_csv(path, index=False)
    return path


# ------------------------------------------------------------ map output

def grid_image(grid: OccupancyGrid, occ_threshold: float = 0.0) -> np.ndarray:
    """uint8 image, top row = largest y"""
    image = np.full(grid.shape, PGM_UNKNOWN, dtype=np.uint8)
    image[grid.cells > occ_threshold] = PGM_OCCUPIED
    image[grid.cells < occ_threshold] = PGM_FREE
    return np.ascontiguousarray(np.flipud(image))


def write_map(grid: OccupancyGrid, pgm_path: Union[str, Path], occ_threshold: float = 0.0) -> Tuple[Path, Path]:
    """Write a binary PGM (P5) and its YAML sidecar; returns both paths"""
    pgm_path = Path(pgm_path)
    Image.fromarray(grid_image(grid, occ_threshold)).save(pgm_path, format="PPM")
    sidecar = {
        "image": pgm_path.name,
        "resolution": grid.resolution_m,
        "origin": [grid.origin[0], grid.origin[1], 0.0],
        "negate": 0,
        "occupied_thresh": 0.65,
        "free_thresh": 0.196,
        "occupied_value": PGM_OCCUPIED,
        "free_value": PGM_FREE,
        "unknown_value": PGM_UNKNOWN,
    }
    yaml_path = pgm_path.with_suffix(".yaml")
    yaml_path.write_text(yaml.safe_dump(sidecar, sort_keys=True), encoding="utf-8")
    logger.info("wrote map %s (%dx%d cells)", pgm_path, grid.shape[1], grid.shape[0])
    return pgm_path, yaml_path
