"""Forward-looking multibeam imaging sonar.

Pipeline per frame: cast an azimuth x elevation ray fan, score each return
by material reflectance, incidence angle, and water attenuation, collapse
elevation by summing returns into a range-azimuth polar grid, then apply
speckle noise and normalization.

Determinism contract: the fan is partitioned into fixed-size azimuth-column
chunks whose private grids are merged in chunk order, so the result is
bit-identical for any worker count. Noise is drawn from a counter-based
stream keyed by (seed, frame), with each bin consuming a fixed position in
the stream.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from numba import njit

from .bvh import SELF_HIT_GUARD, STACK_SIZE, first_hit
from .errors import ConfigError
from .pose import Pose
from .rng import keyed_stream, rayleigh_from_uniform
from .scene import RayHit

CHUNK_COLS = 64  # azimuth columns per work chunk, fixed so results never depend on worker count


@dataclass(frozen=True)
class SonarNoiseParams:
    """Speckle model parameters.

    sigma_phi shapes the beam-pattern gain of the additive term (radians^2),
    sigma_additive is the Rayleigh scale, sigma_mult the Gaussian std of the
    multiplicative term. Defaults are authored for a plausible speckle look,
    they are not calibrated device values.
    """

    sigma_phi: float = 0.1
    sigma_additive: float = 0.15
    sigma_mult: float = 0.2
    enabled: bool = True

    def __post_init__(self):
        if self.sigma_additive < 0 or self.sigma_mult < 0 or self.sigma_phi < 0:
            raise ConfigError("noise sigmas must be >= 0")
        if self.enabled and not self.sigma_phi > 0:
            raise ConfigError("sigma_phi must be > 0 when noise is enabled")


@dataclass(frozen=True)
class SonarConfig:
    """Sensor geometry, bin layout, and noise settings.

    Defaults follow a wide-fan imaging sonar: 130 x 20 degree field of view,
    3000 x 460 cast rays, 30 m max range, 350 x 220 polar bins.
    """

    hfov: float = 130.0            # [deg]
    vfov: float = 20.0             # [deg]
    rays_azimuth: int = 3000
    rays_elevation: int = 460
    range_min: float = 0.1         # [m] returns closer than this are dropped
    range_max: float = 30.0        # [m]
    bins_range: int = 350
    bins_azimuth: int = 220
    attenuation: float = 0.1       # [1/m] acoustic attenuation coefficient
    noise: SonarNoiseParams = field(default_factory=SonarNoiseParams)
    normalization: str = "range_wise"
    normalize_before_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.hfov <= 180:
            raise ConfigError(f"hfov must be in (0, 180], got {self.hfov}")
        if not 0 < self.vfov < 90:
            raise ConfigError(f"vfov must be in (0, 90), got {self.vfov}")
        if self.rays_azimuth < 1 or self.rays_elevation < 1:
            raise ConfigError("ray counts must be >= 1")
        if not 0 <= self.range_min < self.range_max:
            raise ConfigError(
                f"need 0 <= range_min < range_max, got {self.range_min}, {self.range_max}")
        if self.bins_range < 1 or self.bins_azimuth < 1:
            raise ConfigError("bin counts must be >= 1")
        if self.attenuation < 0:
            raise ConfigError(f"attenuation must be >= 0, got {self.attenuation}")
        if self.normalization not in ("none", "range_wise"):
            raise ConfigError(
                f"normalization must be 'none' or 'range_wise', got {self.normalization!r}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "hfov", "vfov", "rays_azimuth", "rays_elevation", "range_min",
            "range_max", "bins_range", "bins_azimuth", "attenuation",
            "normalization", "normalize_before_noise", "seed")}
        d["noise"] = {
            "sigma_phi": self.noise.sigma_phi,
            "sigma_additive": self.noise.sigma_additive,
            "sigma_mult": self.noise.sigma_mult,
            "enabled": self.noise.enabled,
        }
        return d


def sonar_config_from_dict(doc: dict, source: str = "<dict>") -> SonarConfig:
    doc = dict(doc)
    noise_doc = doc.pop("noise", None)
    try:
        noise = SonarNoiseParams(**noise_doc) if noise_doc is not None else SonarNoiseParams()
        return SonarConfig(noise=noise, **doc)
    except (TypeError, ConfigError) as exc:
        raise ConfigError(f"{source}: bad sonar config: {exc}") from exc


class PolarGrid:
    """Range x azimuth intensity grid with bin-center coordinates."""

    def __init__(self, intensities, range_centers, azimuth_centers, range_max):
        self.intensities = np.ascontiguousarray(intensities, dtype=np.float64)
        self.range_centers = np.asarray(range_centers, dtype=np.float64)
        self.azimuth_centers = np.asarray(azimuth_centers, dtype=np.float64)
        self.range_max = float(range_max)
        if self.intensities.shape != (self.range_centers.size, self.azimuth_centers.size):
            raise ConfigError(
                f"grid shape {self.intensities.shape} does not match "
                f"{self.range_centers.size} range x {self.azimuth_centers.size} azimuth centers")
        if not np.isfinite(self.intensities).all() or self.intensities.min() < 0:
            raise ConfigError("grid intensities must be finite and >= 0")

    @property
    def shape(self):
        return self.intensities.shape

    def replace(self, intensities) -> "PolarGrid":
        return PolarGrid(intensities, self.range_centers, self.azimuth_centers,
                         self.range_max)


def empty_grid(config: SonarConfig) -> PolarGrid:
    # Range bins span [0, range_max]; range_min only gates which returns count.
    r_step = config.range_max / config.bins_range
    r_centers = (np.arange(config.bins_range) + 0.5) * r_step
    half = np.radians(config.hfov) / 2.0
    a_step = np.radians(config.hfov) / config.bins_azimuth
    a_centers = -half + (np.arange(config.bins_azimuth) + 0.5) * a_step
    grid = np.zeros((config.bins_range, config.bins_azimuth), dtype=np.float64)
    return PolarGrid(grid, r_centers, a_centers, config.range_max)


def _fan_angles(span_deg: float, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    half = np.radians(span_deg) / 2.0
    return np.linspace(-half, half, n)


@dataclass(frozen=True)
class RayFan:
    """Per-ray generating angles plus world-frame unit directions.

    Rays are ordered azimuth-major: all elevations of azimuth column 0, then
    column 1, and so on. Iterating yields (azimuth, elevation, direction).
    """

    azimuths: np.ndarray       # (n_azimuth,) [rad]
    elevations: np.ndarray     # (n_elevation,) [rad]
    ray_azimuth: np.ndarray    # (n,) generating azimuth per ray
    ray_elevation: np.ndarray  # (n,)
    directions: np.ndarray     # (n, 3) unit vectors, world frame

    def __len__(self):
        return self.directions.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield self.ray_azimuth[k], self.ray_elevation[k], self.directions[k]


def generate_ray_fan(config: SonarConfig, pose: Pose) -> RayFan:
    """Uniform angular fan over the field of view, endpoints inclusive.

    Sensor frame is x forward, y left, z up; azimuth rotates about z,
    elevation tilts toward z. The fan is rotated into world frame by pose.
    """
    az = _fan_angles(config.hfov, config.rays_azimuth)
    el = _fan_angles(config.vfov, config.rays_elevation)
    ray_az = np.repeat(az, el.size)
    ray_el = np.tile(el, az.size)
    cos_el = np.cos(ray_el)
    dirs_sensor = np.stack([cos_el * np.cos(ray_az),
                            cos_el * np.sin(ray_az),
                            np.sin(ray_el)], axis=1)
    dirs_world = dirs_sensor @ pose.rotation().T
    return RayFan(az, el, ray_az, ray_el, np.ascontiguousarray(dirs_world))


def compute_return_intensity(hit: RayHit, alpha: float) -> float:
    """Acoustic return for one hit: reflectance x incidence x attenuation.

    The incidence factor uses the surface's stored winding normal, clamped
    at zero, so geometry hit from behind returns nothing. Calling this on a
    miss is a contract violation.
    """
    if not hit.hit:
        raise ValueError("compute_return_intensity requires hit.hit == True")
    normal = hit.geometric_normal if hit.geometric_normal is not None else hit.normal
    v_n = np.asarray(normal, dtype=np.float64)
    v_in = np.asarray(hit.incident, dtype=np.float64)
    cos_term = -float(v_in @ v_n) / (np.linalg.norm(v_in) * np.linalg.norm(v_n))
    cos_term = max(0.0, cos_term)
    reflectance = hit.material.acoustic_reflectance if hit.material is not None else 0.9
    return reflectance * cos_term * float(np.exp(-alpha * hit.distance))


def bin_returns(returns, config: SonarConfig) -> PolarGrid:
    """Sum return intensities into the polar grid.

    `returns` is an iterable of (range, azimuth [rad], intensity) or a
    (n, 3) array. Returns outside [range_min, range_max] or outside the
    horizontal field of view are dropped. A value exactly on a bin edge
    goes to the higher-index bin; the far and widest edges are closed.
    """
    arr = np.asarray(list(returns) if not isinstance(returns, np.ndarray) else returns,
                     dtype=np.float64).reshape(-1, 3)
    grid = empty_grid(config)
    if arr.shape[0] == 0:
        return grid
    r, az, inten = arr[:, 0], arr[:, 1], arr[:, 2]
    half = np.radians(config.hfov) / 2.0
    keep = (r >= config.range_min) & (r <= config.range_max) & (np.abs(az) <= half)
    if not keep.any():
        return grid
    r, az, inten = r[keep], az[keep], inten[keep]
    i_bin = np.minimum((r / config.range_max * config.bins_range).astype(np.int64),
                       config.bins_range - 1)
    j_bin = np.minimum(((az + half) / (2 * half) * config.bins_azimuth).astype(np.int64),
                       config.bins_azimuth - 1)
    np.add.at(grid.intensities, (i_bin, j_bin), inten)
    return grid


def speckle_compose(intensities, range_centers, azimuth_centers, range_max: float,
                    noise: SonarNoiseParams, w_additive, w_mult) -> np.ndarray:
    """Noise composition with externally supplied samples.

    w_additive and w_mult are per-bin arrays (Rayleigh and Gaussian samples
    in normal operation; tests inject fixed values). The additive term grows
    with the square of range and is gated by a Gaussian beam-pattern gain
    over azimuth; the multiplicative term scales the clean intensity around
    one half.
    """
    r = np.asarray(range_centers, dtype=np.float64)
    phi = np.asarray(azimuth_centers, dtype=np.float64)
    gain = 0.5 * np.exp(-(phi ** 2) / noise.sigma_phi)
    w_tilde = (r[:, None] ** 2 / range_max ** 2) * (1.0 + gain[None, :] * w_additive)
    out = np.asarray(intensities, dtype=np.float64) * (0.5 + w_mult) + w_tilde
    return np.maximum(out, 0.0)


def apply_sonar_noise(grid: PolarGrid, noise: SonarNoiseParams,
                      rng_seed: int, frame: int = 0) -> PolarGrid:
    """Draw speckle samples and compose them onto the grid.

    Disabled noise bypasses the model entirely and returns the grid
    unchanged; it does not evaluate the composition with zeroed samples,
    which would still halve the signal.
    """
    if not noise.enabled:
        return grid
    gen = keyed_stream(rng_seed, frame)
    shape = grid.shape
    w_additive = rayleigh_from_uniform(gen.random(shape), noise.sigma_additive)
    w_mult = gen.normal(0.0, noise.sigma_mult, shape) if noise.sigma_mult > 0 \
        else np.zeros(shape)
    out = speckle_compose(grid.intensities, grid.range_centers,
                          grid.azimuth_centers, grid.range_max,
                          noise, w_additive, w_mult)
    return grid.replace(out)


def normalize_range_wise(grid: PolarGrid) -> PolarGrid:
    """Divide each range row by its own maximum; all-zero rows stay zero."""
    row_max = grid.intensities.max(axis=1, keepdims=True)
    scale = np.where(row_max > 0, row_max, 1.0)
    return grid.replace(grid.intensities / scale)


@njit(cache=True, nogil=True)
def _sonar_chunk(nodes_min, nodes_max, node_left, node_count, tri_order,
                 v0, e1, e2, tri_normal, tri_reflectance,
                 ox, oy, oz, dirs, az_bin,
                 range_min, range_max, alpha, bins_range, out_grid):
    stack = np.empty(STACK_SIZE, dtype=np.int64)
    inv_step = bins_range / range_max
    for k in range(dirs.shape[0]):
        dx = dirs[k, 0]
        dy = dirs[k, 1]
        dz = dirs[k, 2]
        t, tri = first_hit(nodes_min, nodes_max, node_left, node_count,
                           tri_order, v0, e1, e2,
                           ox, oy, oz, dx, dy, dz,
                           SELF_HIT_GUARD, range_max, stack)
        if tri < 0 or t < range_min:
            continue
        # incidence against the stored winding normal: back faces are silent
        cos_term = -(tri_normal[tri, 0] * dx + tri_normal[tri, 1] * dy
                     + tri_normal[tri, 2] * dz)
        if cos_term <= 0.0:
            continue
        value = tri_reflectance[tri] * cos_term * np.exp(-alpha * t)
        i_bin = int(t * inv_step)
        if i_bin >= bins_range:
            i_bin = bins_range - 1
        out_grid[i_bin, az_bin[k]] += value


def _chunk_task(scene, origin, dirs, az_bin, config):
    out = np.zeros((config.bins_range, config.bins_azimuth), dtype=np.float64)
    b = scene.bvh
    _sonar_chunk(b.nodes_min, b.nodes_max, b.node_left, b.node_count,
                 b.tri_order, b.tri_v0, b.tri_e1, b.tri_e2,
                 scene.tri_normal, scene.tri_reflectance,
                 origin[0], origin[1], origin[2], dirs, az_bin,
                 config.range_min, config.range_max, config.attenuation,
                 config.bins_range, out)
    return out


def render_sonar(scene, pose: Pose, config: SonarConfig, workers: int = 1,
                 frame: int = 0) -> PolarGrid:
    """One full sonar frame: fan, cast, bin, noise, normalize.

    No per-scene cache beyond the BVH the scene already carries is built or
    consulted. scene may be None (open water, no returns). The grid is
    bit-identical for any worker count.
    """
    grid = empty_grid(config)
    if scene is not None:
        fan = generate_ray_fan(config, pose)
        origin = np.asarray(pose.position, dtype=np.float64)
        n_el = config.rays_elevation
        half = np.radians(config.hfov) / 2.0
        col_bin = np.minimum(((fan.azimuths + half) / (2 * half)
                              * config.bins_azimuth).astype(np.int64),
                             config.bins_azimuth - 1)
        chunks = []
        for c0 in range(0, config.rays_azimuth, CHUNK_COLS):
            c1 = min(c0 + CHUNK_COLS, config.rays_azimuth)
            dirs = fan.directions[c0 * n_el:c1 * n_el]
            az_bin = np.repeat(col_bin[c0:c1], n_el)
            chunks.append((dirs, az_bin))

        if workers <= 1 or len(chunks) == 1:
            partials = [_chunk_task(scene, origin, d, a, config) for d, a in chunks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_chunk_task, scene, origin, d, a, config)
                           for d, a in chunks]
                partials = [f.result() for f in futures]
        total = grid.intensities
        for part in partials:  # fixed chunk order keeps float sums deterministic
            total += part

    if config.normalize_before_noise and config.normalization == "range_wise":
        grid = normalize_range_wise(grid)
    grid = apply_sonar_noise(grid, config.noise, config.seed, frame)
    if not config.normalize_before_noise and config.normalization == "range_wise":
        grid = normalize_range_wise(grid)
    return grid


def project_fan_image(grid: PolarGrid, config: SonarConfig,
                      width: int, height: int) -> np.ndarray:
    """Resample the polar grid into the familiar wedge-shaped sonar view.

    Nearest-neighbor lookup; fan apex at the bottom center, far range at the
    top edge, pixels outside the wedge are 0.
    """
    half = np.radians(config.hfov) / 2.0
    px = np.arange(width, dtype=np.float64)
    py = np.arange(height, dtype=np.float64)
    u = px[None, :] - (width - 1) / 2.0
    v = (height - 1) - py[:, None]
    scale = grid.range_max / max(height - 1, 1)
    r = np.hypot(u, v) * scale
    phi = np.arctan2(u, np.maximum(v, 1e-12))
    inside = (r <= grid.range_max) & (np.abs(phi) <= half)

    n_r, n_a = grid.shape
    i_bin = np.minimum((r / grid.range_max * n_r).astype(np.int64), n_r - 1)
    j_bin = np.minimum(((phi + half) / (2 * half) * n_a).astype(np.int64), n_a - 1)
    img = np.where(inside, grid.intensities[i_bin, j_bin], 0.0)
    return img
