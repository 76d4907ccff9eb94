"""
Image-method ray tracer between the two on-board radios.

Every reflection sequence up to ``max_order`` bounces is built by mirroring
the initiator across the walls of the sequence, back-tracking the bounce
points from the responder, and checking every leg for occlusion against all
walls. Radio reflections are specular only.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import Config
from environment import WallSegment, wall_arrays, wrap_angle

logger = logging.getLogger(__name__)

_EPS_T = 1e-9
_ENDFIRE_TOL = 1e-9  # rad


@dataclass(frozen=True)
class RayPath:
    """One propagation path from initiator to responder"""
    gain: complex
    elevation: float
    azimuth: float
    delay: float
    order: int
    vertices: Tuple[Tuple[float, float], ...]
    departure_azimuth: float = 0.0

    @property
    def length(self) -> float:
        return float(sum(math.dist(p, q) for p, q in zip(self.vertices, self.vertices[1:])))

    @property
    def gain_db(self) -> float:
        return 20.0 * math.log10(abs(self.gain))

    @property
    def last_bounce(self) -> Optional[Tuple[float, float]]:
        """Reflection vertex seen by the responder (None for the direct path)"""
        return self.vertices[-2] if self.order > 0 else None

    def in_field_of_view(self, half_fov: float = Config.ARRAY_FOV_RAD) -> bool:
        """True when the path leaves and arrives inside both arrays' field of view"""
        return within_fov(self.azimuth, half_fov) and within_fov(self.departure_azimuth, half_fov)


def within_fov(azimuth: float, half_fov: float = Config.ARRAY_FOV_RAD) -> bool:
    """Strictly inside the field of view; endfire arrivals at exactly +-half_fov are outside"""
    return abs(azimuth) < half_fov - _ENDFIRE_TOL


def path_gain(length: float, loss_db_total: float, wavelength: float) -> complex:
    """Free-space amplitude times reflection losses, with the propagation phase"""
    magnitude = wavelength / (4.0 * math.pi * length) * 10.0 ** (-loss_db_total / 20.0)
    return magnitude * complex(math.cos(-2.0 * math.pi * length / wavelength),
                               math.sin(-2.0 * math.pi * length / wavelength))


def _leg_blocked(p: np.ndarray, q: np.ndarray, wa: np.ndarray, wb: np.ndarray) -> bool:
    """True if the open segment p->q crosses any wall"""
    if len(wa) == 0:
        return False
    d = q - p
    e = wb - wa
    w = wa - p
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    ok = np.abs(denom) >= 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / denom
        s = (w[:, 0] * d[1] - w[:, 1] * d[0]) / denom
    hits = ok & (t > _EPS_T) & (t < 1.0 - _EPS_T) & (s >= 0.0) & (s <= 1.0)
    return bool(hits.any())


def _intersect_line_with_wall(p: np.ndarray, q: np.ndarray, wall: WallSegment) -> Optional[np.ndarray]:
    """Point where segment p->q crosses the wall segment, if it does"""
    a = np.asarray(wall.a, dtype=float)
    e = np.asarray(wall.b, dtype=float) - a
    d = q - p
    denom = d[0] * e[1] - d[1] * e[0]
    if abs(denom) < 1e-15:
        return None
    w = a - p
    t = (w[0] * e[1] - w[1] * e[0]) / denom
    s = (w[0] * d[1] - w[1] * d[0]) / denom
    if not (_EPS_T < t < 1.0 - _EPS_T) or s < 0.0 or s > 1.0:
        return None
    return p + t * d


def _reflection_vertices(initiator: np.ndarray, responder: np.ndarray,
                         sequence: Sequence[WallSegment]) -> Optional[List[np.ndarray]]:
    images = [initiator]
    for wall in sequence:
        images.append(wall.mirror(images[-1]))
    bounces: List[np.ndarray] = []
    current = responder
    for k in range(len(sequence), 0, -1):
        point = _intersect_line_with_wall(current, images[k], sequence[k - 1])
        if point is None:
            return None
        bounces.append(point)
        current = point
    return [initiator] + bounces[::-1] + [responder]


def _wall_sequences(n_walls: int, max_order: int) -> Iterable[Tuple[int, ...]]:
    for order in range(1, max_order + 1):
        for seq in itertools.product(range(n_walls), repeat=order):
            if all(seq[i] != seq[i + 1] for i in range(order - 1)):
                yield seq


def trace_paths(initiator: Sequence[float], responder: Sequence[float], responder_boresight: float,
                walls: Sequence[WallSegment], max_order: int = Config.MAX_ORDER,
                include_direct: bool = False,
                wavelength: Optional[float] = None) -> List[RayPath]:
    """All valid specular paths up to ``max_order`` bounces, strongest first.

    The direct path is only produced when ``include_direct`` is set (rig without
    absorber). Azimuths are measured at the responder, departure azimuths at
    the initiator, both against the shared boresight.
    """
    if not 1 <= max_order <= 3:
        raise ValueError(f"max_order must be in [1, 3], got {max_order}")
    tx = np.asarray(initiator, dtype=float)
    rx = np.asarray(responder, dtype=float)
    if np.array_equal(tx, rx):
        raise ValueError("initiator and responder must be distinct points")
    lam = Config.wavelength() if wavelength is None else wavelength
    wa, wb = wall_arrays(walls)

    candidates: List[Tuple[List[np.ndarray], float]] = []  # (vertices, amplitude kept over the bounces)
    if include_direct and not _leg_blocked(tx, rx, wa, wb):
        candidates.append(([tx, rx], 1.0))
    for seq in _wall_sequences(len(walls), max_order):
        chain = [walls[i] for i in seq]
        vertices = _reflection_vertices(tx, rx, chain)
        if vertices is None:
            continue
        if any(_leg_blocked(p, q, wa, wb) for p, q in zip(vertices, vertices[1:])):
            continue
        candidates.append((vertices, math.prod(w.material.amplitude_factor for w in chain)))

    paths = []
    for vertices, kept in candidates:
        length = float(sum(np.linalg.norm(q - p) for p, q in zip(vertices, vertices[1:])))
        arrive = vertices[-2] - rx
        depart = vertices[1] - tx
        paths.append(RayPath(
            gain=kept * path_gain(length, 0.0, lam),
            elevation=0.0,
            azimuth=wrap_angle(math.atan2(arrive[1], arrive[0]) - responder_boresight),
            delay=length / Config.SPEED_OF_LIGHT,
            order=len(vertices) - 2,
            vertices=tuple((float(v[0]), float(v[1])) for v in vertices),
            departure_azimuth=wrap_angle(math.atan2(depart[1], depart[0]) - responder_boresight),
        ))
    paths.sort(key=lambda p: -abs(p.gain))
    logger.debug("traced %d paths (max_order=%d, %d walls)", len(paths), max_order, len(walls))
    return paths


def strongest_visible_path(paths: Sequence[RayPath],
                           half_fov: float = Config.ARRAY_FOV_RAD) -> Optional[RayPath]:
    """Strongest path inside both arrays' field of view (the one FTM locks onto)"""
    for path in paths:
        if path.in_field_of_view(half_fov):
            return path
    return None


def paths_frame(paths: Sequence[RayPath], t: Optional[float] = None) -> pd.DataFrame:
    """Debug table of paths: order, length_m, gain_db, azimuth_deg"""
    frame = pd.DataFrame({
        "order": [p.order for p in paths],
        "length_m": [p.length for p in paths],
        "gain_db": [p.gain_db for p in paths],
        "azimuth_deg": [math.degrees(p.azimuth) for p in paths],
    })
    if t is not None:
        frame.insert(0, "t", t)
    return frame


def dump_paths_csv(events: Sequence[Tuple[float, Sequence[RayPath]]], path: Union[str, Path]) -> Path:
    """One table of the traced paths of every (time, paths) event"""
    path = Path(path)
    frames = [paths_frame(paths, t) for t, paths in events]
    frame = pd.concat(frames, ignore_index=True) if frames else paths_frame([], 0.0)
    frame.to_csv(path, index=False)
    return path
