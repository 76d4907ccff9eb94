"""
Configuration settings for the waveslam simulator
"""

import logging
import math
import os
from pathlib import Path
from typing import Optional

from scipy import constants


class ConfigError(ValueError):
    """Invalid user-supplied configuration (scenario, profile, flags)"""


class Config:
    """Configuration management for the waveslam simulator"""

    # Physical constants
    SPEED_OF_LIGHT = constants.c
    CARRIER_HZ = 60.48e9  # 802.11ad channel 2

    # Antenna array
    ARRAY_K = 6
    ARRAY_J = 6
    ARRAY_SPACING_WAVELENGTHS = 0.5
    ARRAY_FOV_RAD = 0.5 * math.pi

    # Ray tracing
    MAX_ORDER = 2

    # FTM
    FTM_N = 8
    FTM_MAX_N = 32
    FTM_SIFS_S = 3e-6
    FTM_QUANTIZATION_S = 0.1e-9
    FTM_JITTER_REFERENCE_M = 1.0  # free-space distance at which jitter_sigma_s applies

    # AoA estimator (degrees here, radians in EstimatorConfig)
    AOA_COARSE_STEP_DEG = 1.0
    AOA_REFINE_STEP_DEG = 0.1
    AOA_MAX_PATHS = 5
    AOA_RESIDUAL_STOP = 0.01
    AOA_REFINE_ROUNDS = 3
    AOA_SIC_ROUND_LIMIT = 30  # cancellation sweeps per added path before giving up on convergence
    AOA_NOISE_FLOOR_FACTOR = 20.0  # a matched atom must capture more than this many noise powers

    # Sensors
    LIDAR_ANGULAR_STEP_DEG = 1.0
    LIDAR_MAX_RANGE_M = 12.0
    LIDAR_SIGMA_M = 0.02

    # Fusion gates
    GATE_ELEVATION_MAX_DEG = 5.0
    GATE_RANGE_MIN_M = 0.3
    GATE_RANGE_MAX_M = 7.0
    GATE_AZIMUTH_MAX_DEG = 40.0
    GATE_MIN_GAIN_DB: Optional[float] = None  # power gate off by default

    # Point selection
    SELECTION_SECTOR_DEG = 5.0
    SELECTION_DEPTH = 5
    SELECTION_DISAGREEMENT_M = 0.30

    # Occupancy grid
    GRID_RESOLUTION_M = 0.05
    GRID_MARGIN_M = 1.0
    GRID_CLAMP = 10.0
    GRID_L_OCC = 0.85
    GRID_L_FREE = -0.4

    # Capability sweeps
    CAPABILITY_DISTANCES_M = (1.0, 3.0, 5.0, 7.0)
    CAPABILITY_ANGLE_DISTANCES_M = (1.0, 3.0, 5.0)
    CAPABILITY_ANGLES_DEG = (-40.0, -30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0)
    CAPABILITY_REPETITIONS = 50

    # Bundled data
    BASE_DIR = Path(__file__).resolve().parent
    SCENARIO_DIR = Path(os.getenv("WAVESLAM_SCENARIO_DIR", BASE_DIR / "scenarios"))
    PROFILE_DIR = Path(os.getenv("WAVESLAM_PROFILE_DIR", BASE_DIR / "profiles"))
    DEFAULT_PROFILE = os.getenv("WAVESLAM_PROFILE", "calibrated")

    # Logging Configuration
    LOG_LEVEL = os.getenv("WAVESLAM_LOG_LEVEL", "INFO")
    LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    @classmethod
    def wavelength(cls) -> float:
        """Carrier wavelength in metres"""
        return cls.SPEED_OF_LIGHT / cls.CARRIER_HZ

    @classmethod
    def scenario_path(cls, name: str) -> Path:
        """Resolve a bundled scenario name (or pass a path through)"""
        candidate = Path(name)
        if candidate.suffix == ".json" or candidate.exists():
            return candidate
        return cls.SCENARIO_DIR / f"{name}.json"

    @classmethod
    def profile_path(cls, name: str) -> Path:
        """Resolve a bundled noise profile name (or pass a path through)"""
        candidate = Path(name)
        if candidate.suffix == ".json" or candidate.exists():
            return candidate
        return cls.PROFILE_DIR / f"{name}.json"

    @classmethod
    def setup_logging(cls, level: Optional[str] = None) -> None:
        """Configure the root logger once for command-line entry points"""
        logging.basicConfig(level=(level or cls.LOG_LEVEL).upper(), format=cls.LOG_FORMAT)
