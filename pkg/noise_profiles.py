"""
Named noise profiles: one bundle of every noise knob a run uses.

Profiles live as JSON under ``profiles/``. ``noiseless`` zeroes every random
term (FTM timestamps stay quantized, clocks stay offset); ``calibrated``
is produced by ``calibrate_profile.py``.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Union

from config import Config, ConfigError
from ftm import ClockModel
from sensors import OdometryNoise

logger = logging.getLogger(__name__)

PROFILE_VERSION = 1


class ProfileError(ConfigError):
    """Noise profile missing, malformed or incomplete"""


@dataclass(frozen=True)
class NoiseProfile:
    name: str
    clock: ClockModel
    csi_noise_sigma: float
    elevation_jitter_sigma: float
    lidar_sigma: float
    lidar_dropout: float
    odometry: OdometryNoise
    ftm_snr_scaling: bool = True
    notes: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("csi_noise_sigma", "elevation_jitter_sigma", "lidar_sigma"):
            if getattr(self, name) < 0:
                raise ProfileError(f"profile '{self.name}': {name} must be >= 0")
        if not 0.0 <= self.lidar_dropout <= 1.0:
            raise ProfileError(f"profile '{self.name}': lidar_dropout must be in [0, 1]")


NOISELESS = NoiseProfile(
    name="noiseless",
    clock=ClockModel(offset_s=0.0421, drift_ppm=0.0, quantization_s=Config.FTM_QUANTIZATION_S, jitter_sigma_s=0.0),
    csi_noise_sigma=0.0,
    elevation_jitter_sigma=0.0,
    lidar_sigma=0.0,
    lidar_dropout=0.0,
    odometry=OdometryNoise(0.0, 0.0),
    ftm_snr_scaling=False,
)

_FIELDS = {
    "clock": ("offset_s", "drift_ppm", "quantization_s", "jitter_sigma_s"),
    "csi": ("noise_sigma", "elevation_jitter_deg"),
    "lidar": ("sigma_m", "dropout_prob"),
    "odometry": ("sigma_xy_per_m", "sigma_theta_per_rad"),
}


def profile_to_dict(profile: NoiseProfile) -> Dict:
    data = {
        "waveslam_profile": PROFILE_VERSION,
        "name": profile.name,
        "clock": asdict(profile.clock),
        "csi": {
            "noise_sigma": profile.csi_noise_sigma,
            "elevation_jitter_deg": round(math.degrees(profile.elevation_jitter_sigma), 12),
        },
        "lidar": {"sigma_m": profile.lidar_sigma, "dropout_prob": profile.lidar_dropout},
        "odometry": {
            "sigma_xy_per_m": profile.odometry.sigma_xy_per_m,
            "sigma_theta_per_rad": profile.odometry.sigma_theta_per_rad,
        },
        "ftm_snr_scaling": profile.ftm_snr_scaling,
    }
    if profile.notes:
        data["notes"] = profile.notes
    return data


def profile_from_dict(data: Dict, source: str = "<profile>") -> NoiseProfile:
    if data.get("waveslam_profile") != PROFILE_VERSION:
        raise ProfileError(f"{source}: missing or unsupported waveslam_profile version")
    for section, keys in _FIELDS.items():
        block = data.get(section)
        if not isinstance(block, dict):
            raise ProfileError(f"{source}: missing section '{section}'")
        missing = [k for k in keys if k not in block]
        if missing:
            raise ProfileError(f"{source}: {section} is missing {', '.join(missing)}")
    try:
        return NoiseProfile(
            name=str(data.get("name", Path(source).stem)),
            clock=ClockModel(**{k: float(data["clock"][k]) for k in _FIELDS["clock"]}),
            csi_noise_sigma=float(data["csi"]["noise_sigma"]),
            elevation_jitter_sigma=math.radians(float(data["csi"]["elevation_jitter_deg"])),
            lidar_sigma=float(data["lidar"]["sigma_m"]),
            lidar_dropout=float(data["lidar"]["dropout_prob"]),
            odometry=OdometryNoise(float(data["odometry"]["sigma_xy_per_m"]),
                                   float(data["odometry"]["sigma_theta_per_rad"])),
            ftm_snr_scaling=bool(data.get("ftm_snr_scaling", True)),
            notes=dict(data.get("notes", {})),
        )
    except ProfileError:
        raise
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"{source}: {exc}") from exc


def load_profile(name_or_path: Union[str, Path]) -> NoiseProfile:
    """Load a bundled profile by name, or a profile file by path"""
    path = Config.profile_path(str(name_or_path))
    if not path.exists():
        if str(name_or_path) == NOISELESS.name:
            return NOISELESS
        raise ProfileError(f"noise profile '{name_or_path}' not found (looked for {path})")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    profile = profile_from_dict(data, str(path))
    logger.info("loaded noise profile '%s' from %s", profile.name, path)
    return profile


def save_profile(profile: NoiseProfile, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(profile_to_dict(profile), indent=2) + "\n", encoding="utf-8")
    return path
