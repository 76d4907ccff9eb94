"""
Narrowband CSI synthesis on a K x J uniform rectangular array.

The array lies in the plane facing the shared boresight; element (k, j) sits
at centered indices along the horizontal (k) and vertical (j) axes. CSI is a
single snapshot: path delay does not appear in it, ranging is FTM's job.
"""

import base64
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from config import Config
from raytrace import RayPath, within_fov

logger = logging.getLogger(__name__)

_SINE_SPACE_TOL = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    k_elems: int = Config.ARRAY_K
    j_elems: int = Config.ARRAY_J
    spacing_wavelengths: float = Config.ARRAY_SPACING_WAVELENGTHS
    carrier_hz: float = Config.CARRIER_HZ

    def __post_init__(self):
        if self.k_elems < 2 or self.j_elems < 2:
            raise ValueError(f"array must be at least 2x2, got {self.k_elems}x{self.j_elems}")
        if not 0.0 < self.spacing_wavelengths <= 1.0:
            raise ValueError(f"spacing_wavelengths must be in (0, 1], got {self.spacing_wavelengths}")

    @property
    def size(self) -> int:
        return self.k_elems * self.j_elems

    @property
    def wavelength(self) -> float:
        return Config.SPEED_OF_LIGHT / self.carrier_hz

    @property
    def beamwidth(self) -> float:
        """Approximate main-lobe width along k, radians"""
        return 2.0 / self.k_elems

    def centered_indices(self):
        k = np.arange(self.k_elems) - (self.k_elems - 1) / 2.0
        j = np.arange(self.j_elems) - (self.j_elems - 1) / 2.0
        return k, j


@dataclass(frozen=True, eq=False)
class CsiSnapshot:
    h: np.ndarray
    noise_sigma: float
    geometry: ArrayGeometry
    dropped_paths: int = 0

    def __post_init__(self):
        if self.h.shape != (self.geometry.k_elems, self.geometry.j_elems):
            raise ValueError(f"CSI shape {self.h.shape} does not match "
                             f"{self.geometry.k_elems}x{self.geometry.j_elems} array")

    @property
    def power(self) -> float:
        return float(np.vdot(self.h, self.h).real)


def in_sine_space(elevation: float, azimuth: float) -> bool:
    return math.sin(elevation) ** 2 + math.sin(azimuth) ** 2 <= 1.0 + _SINE_SPACE_TOL


def steering_vector(geometry: ArrayGeometry, elevation: float, azimuth: float) -> np.ndarray:
    """K x J unit-modulus array response for a plane wave from (elevation, azimuth)"""
    if not in_sine_space(elevation, azimuth):
        raise ValueError(f"angles (el={math.degrees(elevation):.3f} deg, "
                         f"az={math.degrees(azimuth):.3f} deg) outside sine space")
    k, j = geometry.centered_indices()
    scale = 2.0 * math.pi * geometry.spacing_wavelengths
    phase = scale * (np.outer(k * math.sin(azimuth), np.ones_like(j))
                     + np.outer(np.ones_like(k), j * math.sin(elevation)))
    return np.exp(1j * phase)


def steering_matrix(geometry: ArrayGeometry, elevations: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    """Steering vectors for many angle pairs, flattened row-major: shape (N, K*J)"""
    k, j = geometry.centered_indices()
    scale = 2.0 * math.pi * geometry.spacing_wavelengths
    sin_az = np.sin(np.asarray(azimuths, dtype=float))[:, None, None]
    sin_el = np.sin(np.asarray(elevations, dtype=float))[:, None, None]
    phase = scale * (k[None, :, None] * sin_az + j[None, None, :] * sin_el)
    return np.exp(1j * phase).reshape(len(sin_az), -1)


def synthesize_csi(paths: Sequence[RayPath], geometry: ArrayGeometry, noise_sigma: float,
                   elevation_jitter_sigma: float, rng: np.random.Generator,
                   half_fov: float = Config.ARRAY_FOV_RAD) -> CsiSnapshot:
    """Sum of path responses plus white complex Gaussian noise.

    Paths arriving outside the array's field of view (or whose jittered angles
    leave sine space) are dropped and counted in ``dropped_paths``.
    """
    if noise_sigma < 0 or elevation_jitter_sigma < 0:
        raise ValueError("noise_sigma and elevation_jitter_sigma must be >= 0")
    h = np.zeros((geometry.k_elems, geometry.j_elems), dtype=complex)
    dropped = 0
    for path in paths:
        if not within_fov(path.azimuth, half_fov):
            dropped += 1
            continue
        elevation = path.elevation + float(rng.normal(0.0, elevation_jitter_sigma))
        if not in_sine_space(elevation, path.azimuth):
            dropped += 1
            continue
        h += path.gain * steering_vector(geometry, elevation, path.azimuth)
    if noise_sigma > 0:
        shape = h.shape
        h += (noise_sigma / math.sqrt(2.0)) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if dropped:
        logger.debug("synthesize_csi dropped %d of %d paths outside the field of view", dropped, len(paths))
    return CsiSnapshot(h=h, noise_sigma=noise_sigma, geometry=geometry, dropped_paths=dropped)


# ------------------------------------------------------------ log records

def encode_csi(snapshot: CsiSnapshot, t: float, event: Optional[int] = None) -> Dict:
    """Sensor-log record: row-major interleaved re/im float64, base64 encoded"""
    payload = np.ascontiguousarray(snapshot.h, dtype="<c16").view("<f8").tobytes()
    record = {
        "type": "csi",
        "t": t,
        "k": snapshot.geometry.k_elems,
        "j": snapshot.geometry.j_elems,
        "spacing_wavelengths": snapshot.geometry.spacing_wavelengths,
        "carrier_hz": snapshot.geometry.carrier_hz,
        "noise_sigma": snapshot.noise_sigma,
        "dropped_paths": snapshot.dropped_paths,
        "payload": base64.b64encode(payload).decode("ascii"),
    }
    if event is not None:
        record["event"] = event
    return record


def decode_csi(record: Dict) -> CsiSnapshot:
    geometry = ArrayGeometry(int(record["k"]), int(record["j"]),
                             float(record.get("spacing_wavelengths", Config.ARRAY_SPACING_WAVELENGTHS)),
                             float(record.get("carrier_hz", Config.CARRIER_HZ)))
    raw = np.frombuffer(base64.b64decode(record["payload"]), dtype="<f8")
    if raw.size != 2 * geometry.size:
        raise ValueError(f"CSI payload has {raw.size} floats, expected {2 * geometry.size}")
    h = raw.view("<c16").reshape(geometry.k_elems, geometry.j_elems).astype(complex)
    return CsiSnapshot(h=h, noise_sigma=float(record.get("noise_sigma", 0.0)), geometry=geometry,
                       dropped_paths=int(record.get("dropped_paths", 0)))
