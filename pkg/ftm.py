"""
IEEE 802.11 Fine Timing Measurement burst simulation.

The responder sends FTM frames (t1 on its clock), the initiator receives them
(t2 on its clock) and answers with an Ack (t3), which the responder receives
(t4). The two clocks are unsynchronized:

    responder clock  R(tau) = (1 + drift) * tau
    initiator clock  I(tau) = tau - offset

Only receive timestamps (t2, t4) carry jitter and quantization; transmit
timestamps are exact. The ToF estimate averages the round trip minus the
initiator's turnaround over the burst, so the offset cancels.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import Config

logger = logging.getLogger(__name__)

FRAME_SPACING_S = 250e-6  # nominal gap between FTM frames of a burst


@dataclass(frozen=True)
class ClockModel:
    offset_s: float = 0.0
    drift_ppm: float = 0.0
    quantization_s: float = 0.0
    jitter_sigma_s: float = 0.0

    def __post_init__(self):
        if self.quantization_s < 0:
            raise ValueError(f"quantization_s must be >= 0, got {self.quantization_s}")
        if self.jitter_sigma_s < 0:
            raise ValueError(f"jitter_sigma_s must be >= 0, got {self.jitter_sigma_s}")

    def quantize(self, t: np.ndarray) -> np.ndarray:
        if self.quantization_s == 0:
            return t
        return np.round(t / self.quantization_s) * self.quantization_s


@dataclass(frozen=True)
class FtmMeasurement:
    t1: float
    t2: float
    t3: float
    t4: float

    @property
    def round_trip(self) -> float:
        """(t4 - t1) - (t3 - t2): twice the ToF"""
        return (self.t4 - self.t1) - (self.t3 - self.t2)


@dataclass(frozen=True)
class FtmBurst:
    measurements: Tuple[FtmMeasurement, ...]
    first_frame_zeroed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        if len(self.measurements) > Config.FTM_MAX_N:
            raise ValueError(f"a burst holds at most {Config.FTM_MAX_N} measurements")

    @property
    def n(self) -> int:
        return len(self.measurements)


def jitter_scale_for_gain(gain: complex, wavelength: Optional[float] = None,
                          reference_m: float = Config.FTM_JITTER_REFERENCE_M) -> float:
    """Jitter multiplier for an arrival of amplitude |gain|.

    1.0 for a free-space path of ``reference_m``; weaker arrivals are noisier
    in inverse proportion to their amplitude.
    """
    lam = Config.wavelength() if wavelength is None else wavelength
    magnitude = abs(gain)
    if magnitude <= 0:
        raise ValueError("gain must be non-zero")
    return (lam / (4.0 * math.pi * reference_m)) / magnitude


def simulate_burst(true_tof_s: float, n: int, clock: ClockModel, sifs_s: float = Config.FTM_SIFS_S,
                   rng: Optional[np.random.Generator] = None, snr_scale: float = 1.0) -> FtmBurst:
    """Simulate one FTM burst of ``n`` measurements over a ToF of ``true_tof_s``"""
    if not 1 <= n <= Config.FTM_MAX_N:
        raise ValueError(f"n must be in [1, {Config.FTM_MAX_N}], got {n}")
    if not true_tof_s > 0:
        raise ValueError(f"true_tof_s must be > 0, got {true_tof_s}")
    if rng is None:
        rng = np.random.default_rng()
    drift = clock.drift_ppm * 1e-6
    sigma = clock.jitter_sigma_s * snr_scale

    # true departure times of the FTM frames, dithered inside each slot
    tau1 = (np.arange(n) + rng.uniform(0.0, 1.0, n)) * FRAME_SPACING_S
    j2 = rng.normal(0.0, sigma, n)
    j4 = rng.normal(0.0, sigma, n)

    t1 = (1.0 + drift) * tau1
    t2 = clock.quantize((tau1 + true_tof_s - clock.offset_s) + j2)
    t3 = t2 + sifs_s
    # the Ack leaves sifs after the initiator's own receive timestamp
    tau4 = (t3 + clock.offset_s) + true_tof_s
    t4 = clock.quantize((1.0 + drift) * tau4 + j4)

    measurements = tuple(FtmMeasurement(float(a), float(b), float(c), float(d))
                         for a, b, c, d in zip(t1, t2, t3, t4))
    return FtmBurst(measurements=measurements, first_frame_zeroed=True)


def estimate_tof(burst: FtmBurst) -> float:
    """Average of ((t4 - t1) - (t3 - t2)) / 2 over the burst"""
    if burst.n == 0:
        raise ValueError("cannot estimate ToF from an empty burst")
    return math.fsum(m.round_trip for m in burst.measurements) / (2.0 * burst.n)


def protocol_trace(burst: FtmBurst) -> List[str]:
    """Frame-by-frame trace in ns.

    FTM frame N reports t1/t4 of measurement N-1; frame 1 reports zeros. Each
    Ack line carries the initiator's t2/t3 for the frame it acknowledges.
    """
    lines = []
    frames = burst.n + 1
    for index in range(1, frames + 1):
        if index == 1 and burst.first_frame_zeroed:
            t1, t4 = 0.0, 0.0
        else:
            reported = burst.measurements[index - 2]
            t1, t4 = reported.t1, reported.t4
        lines.append(f"{index:3d} FTM responder t1={t1 * 1e9:.4f} t4={t4 * 1e9:.4f}")
        if index <= burst.n:
            own = burst.measurements[index - 1]
            lines.append(f"{index:3d} ACK initiator t2={own.t2 * 1e9:.4f} t3={own.t3 * 1e9:.4f}")
    return lines


def burst_record(burst: FtmBurst, t: float, event: Optional[int] = None) -> dict:
    """Sensor-log record for one burst"""
    record = {
        "type": "ftm",
        "t": t,
        "n": burst.n,
        "first_frame_zeroed": burst.first_frame_zeroed,
        "t1": [m.t1 for m in burst.measurements],
        "t2": [m.t2 for m in burst.measurements],
        "t3": [m.t3 for m in burst.measurements],
        "t4": [m.t4 for m in burst.measurements],
    }
    if event is not None:
        record["event"] = event
    return record


def burst_from_record(record: dict) -> FtmBurst:
    columns: Sequence[Sequence[float]] = (record["t1"], record["t2"], record["t3"], record["t4"])
    if len({len(c) for c in columns}) != 1:
        raise ValueError("ftm record has ragged timestamp columns")
    return FtmBurst(
        measurements=tuple(FtmMeasurement(*map(float, row)) for row in zip(*columns)),
        first_frame_zeroed=bool(record.get("first_frame_zeroed", True)),
    )
