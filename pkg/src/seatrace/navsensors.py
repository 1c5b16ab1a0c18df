"""Doppler velocity log and barometer models.

The DVL casts a 4-beam Janus fan against the scene to decide bottom lock:
enough valid beams give ground-truth velocity plus Gaussian noise, too few
give a dropout. Its measurement rate adapts to the dominant beam range via
a bracket table, mirroring real devices that ping slower in deep water. The
barometer is hydrostatic pressure with optional Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .pose import Pose
from .rng import keyed_stream
from .scene import cast_ray

_BEAM_AZIMUTHS_DEG = (45.0, 135.0, 225.0, 315.0)


@dataclass(frozen=True)
class DvlConfig:
    janus_angle: float = 30.0            # [deg] beam tilt from the sensor -z axis
    max_beam_range: float = 50.0         # [m]
    velocity_noise_std: float = 0.01     # [m/s] per axis, authored default
    rate_curve: tuple = ((20.0, 8.0), (50.0, 4.0))  # (range threshold [m], rate [Hz])
    min_valid_beams: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.janus_angle < 90:
            raise ConfigError(f"janus_angle must be in (0, 90), got {self.janus_angle}")
        if not self.max_beam_range > 0:
            raise ConfigError("max_beam_range must be positive")
        if self.velocity_noise_std < 0:
            raise ConfigError("velocity_noise_std must be >= 0")
        curve = tuple((float(r), float(hz)) for r, hz in self.rate_curve)
        if not curve:
            raise ConfigError("rate_curve must not be empty")
        thresholds = [r for r, _ in curve]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ConfigError("rate_curve thresholds must be strictly increasing")
        if any(hz <= 0 for _, hz in curve):
            raise ConfigError("rate_curve rates must be positive")
        object.__setattr__(self, "rate_curve", curve)
        if not 1 <= self.min_valid_beams <= 4:
            raise ConfigError(f"min_valid_beams must be 1..4, got {self.min_valid_beams}")


@dataclass(frozen=True)
class DvlMeasurement:
    timestamp: float
    velocity: np.ndarray          # sensor-frame m/s, None on dropout
    beam_ranges: np.ndarray       # (4,) meters, 0.0 for invalid beams
    beam_valid: np.ndarray        # (4,) bool
    valid: bool
    next_interval: float          # [s] until the next ping


@dataclass(frozen=True)
class BarometerConfig:
    atmospheric_pressure: float = 101325.0  # [Pa]
    water_density: float = 1000.0           # [kg/m^3]
    gravity: float = 9.80665                # [m/s^2]
    noise_std: float = 0.0                  # [Pa]
    seed: int = 0

    def __post_init__(self):
        if self.atmospheric_pressure <= 0 or self.water_density <= 0 or self.gravity <= 0:
            raise ConfigError("pressure, density, and gravity must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")


def dvl_beam_directions(config: DvlConfig) -> np.ndarray:
    """The four sensor-frame beam unit vectors of the Janus arrangement."""
    tilt = np.radians(config.janus_angle)
    az = np.radians(_BEAM_AZIMUTHS_DEG)
    return np.stack([np.sin(tilt) * np.cos(az),
                     np.sin(tilt) * np.sin(az),
                     -np.cos(tilt) * np.ones_like(az)], axis=1)


def rate_for_range(config: DvlConfig, max_valid_range: float) -> float:
    """Ping rate from the bracket table: first bracket covering the range.

    Ranges beyond the last threshold, and the no-lock case, use the last
    (slowest) bracket.
    """
    for threshold, rate in config.rate_curve:
        if max_valid_range <= threshold:
            return rate
    return config.rate_curve[-1][1]


def sample_dvl(scene, pose: Pose, true_velocity, config: DvlConfig,
               time: float, sample_index: int = 0) -> DvlMeasurement:
    """One DVL ping.

    true_velocity is the body-frame ground truth; noise is drawn from a
    stream keyed by (config.seed, sample_index) so measurement k is the
    same regardless of what other sensors sampled in between.
    """
    beams = dvl_beam_directions(config) @ pose.rotation().T
    ranges = np.zeros(4)
    flags = np.zeros(4, dtype=bool)
    for b in range(4):
        if scene is None:
            break
        hit = cast_ray(scene, pose.position, beams[b], max_range=config.max_beam_range)
        if hit.hit:
            ranges[b] = hit.distance
            flags[b] = True

    n_valid = int(flags.sum())
    max_valid = float(ranges[flags].max()) if n_valid else float("inf")
    interval = 1.0 / rate_for_range(config, max_valid)

    if n_valid < config.min_valid_beams:
        return DvlMeasurement(time, None, ranges, flags, False, interval)

    velocity = np.asarray(true_velocity, dtype=np.float64).reshape(3).copy()
    if config.velocity_noise_std > 0:
        gen = keyed_stream(config.seed, sample_index)
        velocity = velocity + gen.normal(0.0, config.velocity_noise_std, 3)
    return DvlMeasurement(time, velocity, ranges, flags, True, interval)


def sample_barometer(depth_below_surface: float, config: BarometerConfig,
                     sample_index: int = 0) -> float:
    """Hydrostatic pressure at depth, in Pascal."""
    if depth_below_surface < 0:
        raise ValueError(f"depth must be >= 0, got {depth_below_surface}")
    pressure = config.atmospheric_pressure \
        + config.water_density * config.gravity * depth_below_surface
    if config.noise_std > 0:
        gen = keyed_stream(config.seed, sample_index)
        pressure += gen.normal(0.0, config.noise_std)
    return float(pressure)
