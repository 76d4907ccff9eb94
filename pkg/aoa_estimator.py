"""
Multipath parameter extraction from a single CSI snapshot.

Greedy matched-filter decomposition: find the (elevation, azimuth) whose
steering vector best correlates with the residual, refine it locally, take the
gain, subtract, repeat. After every addition, successive interference
cancellation re-estimates each path against the others until the angles stop
moving. Weak leftovers are pruned and the survivors are refined jointly with
scipy before a final least-squares fit of the gains.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from config import Config
from mmwave_phy import ArrayGeometry, CsiSnapshot, steering_matrix

logger = logging.getLogger(__name__)

_SINE_SPACE_TOL = 1e-12
_EXACT_FIT = 1e-12


@dataclass(frozen=True)
class PathEstimate:
    gain: complex
    elevation: float
    azimuth: float
    residual_power_after: float
    iteration: int = 0

    def __post_init__(self):
        if not 0.0 <= self.residual_power_after <= 1.0:
            raise ValueError(f"residual_power_after must be in [0, 1], got {self.residual_power_after}")

    @property
    def gain_db(self) -> float:
        magnitude = abs(self.gain)
        return 20.0 * math.log10(magnitude) if magnitude > 0 else -math.inf


@dataclass(frozen=True)
class EstimatorConfig:
    coarse_step: float = math.radians(Config.AOA_COARSE_STEP_DEG)
    refine_step: float = math.radians(Config.AOA_REFINE_STEP_DEG)
    max_paths: int = Config.AOA_MAX_PATHS
    residual_stop: float = Config.AOA_RESIDUAL_STOP
    refine_rounds: int = Config.AOA_REFINE_ROUNDS  # minimum sweeps over the final path set
    sic_round_limit: int = Config.AOA_SIC_ROUND_LIMIT
    noise_floor_factor: float = Config.AOA_NOISE_FLOOR_FACTOR

    def __post_init__(self):
        if not 0 < self.refine_step < self.coarse_step:
            raise ValueError("refine_step must be positive and smaller than coarse_step")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be >= 0")
        if self.sic_round_limit < 1:
            raise ValueError("sic_round_limit must be >= 1")
        if self.noise_floor_factor < 0:
            raise ValueError("noise_floor_factor must be >= 0")


def _valid(elevations: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    return np.sin(elevations) ** 2 + np.sin(azimuths) ** 2 <= 1.0 + _SINE_SPACE_TOL


@lru_cache(maxsize=8)
def coarse_dictionary(geometry: ArrayGeometry, coarse_step: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elevation/azimuth grid over +-90 deg (sine-space points only) and its steering matrix.

    Rows are ordered elevation-major, so argmax ties resolve to the lowest
    elevation, then the lowest azimuth.
    """
    half = int(round((math.pi / 2) / coarse_step))
    axis = np.arange(-half, half + 1) * coarse_step
    el, az = np.meshgrid(axis, axis, indexing="ij")
    el, az = el.ravel(), az.ravel()
    keep = _valid(el, az)
    el, az = el[keep], az[keep]
    atoms = steering_matrix(geometry, el, az)
    for array in (el, az, atoms):
        array.setflags(write=False)
    logger.debug("built %d-atom coarse dictionary for %dx%d array",
                 len(el), geometry.k_elems, geometry.j_elems)
    return el, az, atoms


def _local_search(geometry: ArrayGeometry, residual: np.ndarray, center: Tuple[float, float],
                  span_steps: int, step: float) -> Tuple[float, float, np.ndarray]:
    offsets = np.arange(-span_steps, span_steps + 1) * step
    el, az = np.meshgrid(center[0] + offsets, center[1] + offsets, indexing="ij")
    el, az = el.ravel(), az.ravel()
    keep = _valid(el, az)
    el, az = el[keep], az[keep]
    atoms = steering_matrix(geometry, el, az)
    best = int(np.argmax(np.abs(atoms.conj() @ residual)))
    return float(el[best]), float(az[best]), atoms[best]


def _best_atom(geometry: ArrayGeometry, residual: np.ndarray,
               config: EstimatorConfig) -> Tuple[float, float, np.ndarray]:
    el, az, atoms = coarse_dictionary(geometry, config.coarse_step)
    best = int(np.argmax(np.abs(atoms.conj() @ residual)))
    span = int(round(config.coarse_step / config.refine_step))
    return _local_search(geometry, residual, (float(el[best]), float(az[best])), span, config.refine_step)


@dataclass
class _Component:
    gain: complex
    elevation: float
    azimuth: float
    atom: np.ndarray
    iteration: int


def _fit(h: np.ndarray, atoms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Joint least-squares gains for the given atoms (rows) and the residual they leave"""
    gains = np.linalg.lstsq(atoms.T, h, rcond=None)[0]
    return gains, h - atoms.T @ gains


def _power(x: np.ndarray) -> float:
    return float(np.vdot(x, x).real)


def _cancel_sweep(geometry: ArrayGeometry, h: np.ndarray, found: List[_Component],
                  config: EstimatorConfig) -> bool:
    """Re-estimate every path with all the others subtracted; True if any angle moved"""
    size = geometry.size
    coarse_span = 4
    fine_span = int(round(config.coarse_step / config.refine_step))
    moved = False
    for i, comp in enumerate(found):
        isolated = h.copy()
        for other in found[:i] + found[i + 1:]:
            isolated -= other.gain * other.atom
        el, az, _ = _local_search(geometry, isolated, (comp.elevation, comp.azimuth), coarse_span, config.coarse_step)
        el, az, atom = _local_search(geometry, isolated, (el, az), fine_span, config.refine_step)
        moved = moved or (el, az) != (comp.elevation, comp.azimuth)
        comp.gain, comp.elevation, comp.azimuth, comp.atom = complex(np.vdot(atom, isolated) / size), el, az, atom
    return moved


def _cancel_until_stable(geometry: ArrayGeometry, h: np.ndarray, found: List[_Component],
                         config: EstimatorConfig, min_rounds: int = 0) -> None:
    for sweep in range(max(config.sic_round_limit, min_rounds)):
        if not _cancel_sweep(geometry, h, found, config) and sweep + 1 >= min_rounds:
            return
    logger.debug("interference cancellation hit the %d sweep limit with %d paths",
                 config.sic_round_limit, len(found))


def _prune(h: np.ndarray, total: float, found: List[_Component], config: EstimatorConfig) -> List[_Component]:
    """Drop paths whose jointly fitted power is below residual_stop; the strongest always stays"""
    size = h.size
    while len(found) > 1:
        gains, _ = _fit(h, np.array([c.atom for c in found]))
        shares = np.abs(gains) ** 2 * size / total
        weakest = int(np.argmin(shares))
        if shares[weakest] >= config.residual_stop:
            break
        del found[weakest]
    return found


def _joint_refine(geometry: ArrayGeometry, h: np.ndarray, total: float, found: List[_Component],
                  config: EstimatorConfig) -> None:
    """Continuous refinement of all angles at once, each within one coarse step of its grid estimate"""
    n = len(found)
    start = np.array([c.elevation for c in found] + [c.azimuth for c in found])

    def objective(x: np.ndarray) -> float:
        _, residual = _fit(h, steering_matrix(geometry, x[:n], x[n:]))
        return _power(residual) / total

    base = objective(start)
    if base <= _EXACT_FIT:
        return
    half_pi = math.pi / 2
    bounds = [(max(v - config.coarse_step, -half_pi), min(v + config.coarse_step, half_pi)) for v in start]
    result = minimize(objective, start, method="L-BFGS-B", bounds=bounds,
                      options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
    el, az = result.x[:n], result.x[n:]
    if not result.fun < base or not np.all(_valid(el, az)):
        logger.debug("joint refinement kept the grid estimate (%.4g -> %.4g)", base, result.fun)
        return
    atoms = steering_matrix(geometry, el, az)
    for i, comp in enumerate(found):
        comp.elevation, comp.azimuth, comp.atom = float(el[i]), float(az[i]), atoms[i]


def extract_paths(csi: CsiSnapshot, config: EstimatorConfig = EstimatorConfig()) -> List[PathEstimate]:
    """Recover per-path (gain, elevation, azimuth) from a snapshot, strongest first.

    Each greedy addition is followed by interference cancellation sweeps until
    no angle moves. Paths left with less than ``residual_stop`` of the power
    are pruned, the survivors are refined jointly, and the gains come from one
    least-squares fit. ``residual_power_after`` of the i-th extracted path is
    the residual fraction of the fit over paths 0..i.

    A snapshot whose first matched atom captures no more than the noise floor yields
    a single estimate flagged with ``residual_power_after == 1.0`` (see
    :func:`is_noise_only`); a snapshot with no power at all yields ``[]``.
    """
    geometry = csi.geometry
    size = geometry.size
    raw = np.asarray(csi.h, dtype=complex).ravel()
    raw_power = _power(raw)
    if raw_power <= 0.0:
        return []
    # work on a unit-power copy whose largest element is real, undo it on the gains
    peak = raw[int(np.argmax(np.abs(raw)))]
    anchor = math.sqrt(raw_power) * np.exp(1j * np.angle(peak))
    h = raw / anchor
    total = _power(h)
    noise_floor = config.noise_floor_factor * csi.noise_sigma ** 2 / raw_power

    residual = h.copy()
    found: List[_Component] = []
    fraction = 1.0
    while len(found) < config.max_paths and fraction >= config.residual_stop:
        el, az, atom = _best_atom(geometry, residual, config)
        gain = complex(np.vdot(atom, residual) / size)
        if abs(gain) ** 2 * size <= noise_floor:
            if not found:
                logger.debug("first atom captured %.3g, noise floor %.3g: noise only",
                             abs(gain) ** 2 * size, noise_floor)
                return [PathEstimate(gain=gain * anchor, elevation=el, azimuth=az, residual_power_after=1.0)]
            break
        found.append(_Component(gain, el, az, atom, len(found)))
        _cancel_until_stable(geometry, h, found, config)
        _, residual = _fit(h, np.array([c.atom for c in found]))
        fraction = _power(residual) / total

    _cancel_until_stable(geometry, h, found, config, min_rounds=config.refine_rounds)
    found = _prune(h, total, found, config)
    _joint_refine(geometry, h, total, found, config)
    found = _prune(h, total, found, config)

    found.sort(key=lambda c: c.iteration)
    atoms = np.array([c.atom for c in found])
    gains, _ = _fit(h, atoms)
    estimates = []
    for i, comp in enumerate(found):
        _, nested = _fit(h, atoms[:i + 1])
        fraction = min(max(_power(nested) / total, 0.0), 1.0)
        estimates.append(PathEstimate(gain=complex(gains[i] * anchor), elevation=comp.elevation,
                                      azimuth=comp.azimuth, residual_power_after=fraction, iteration=i))
    estimates.sort(key=lambda e: -abs(e.gain))
    logger.debug("extracted %d paths, final residual fraction %.4g",
                 len(estimates), min(e.residual_power_after for e in estimates))
    return estimates


def is_noise_only(estimates: Sequence[PathEstimate]) -> bool:
    """True for the flagged single-estimate result of a snapshot that held nothing above the noise floor"""
    return len(estimates) == 1 and estimates[0].residual_power_after >= 1.0


def strongest_path(estimates: Sequence[PathEstimate]) -> PathEstimate:
    """Estimate with the largest |gain|; ties go to the smaller |azimuth|"""
    if not estimates:
        raise ValueError("strongest_path needs at least one estimate")
    return max(estimates, key=lambda e: (abs(e.gain), -abs(e.azimuth)))


def reconstruct(estimates: Sequence[PathEstimate], geometry: ArrayGeometry) -> np.ndarray:
    """Sum of estimated path responses, K x J"""
    h = np.zeros(geometry.size, dtype=complex)
    for est in estimates:
        atoms = steering_matrix(geometry, np.array([est.elevation]), np.array([est.azimuth]))
        h += est.gain * atoms[0]
    return h.reshape(geometry.k_elems, geometry.j_elems)
