"""Pinhole camera rendering and the per-channel water-column model.

The camera renders an in-air RGB image and a depth image by ray casting with
Lambertian shading, then the water model turns that pair into an underwater
image: per channel, direct light decays exponentially with range while
veiling light saturates toward the asymptotic water color. The two stages
are deliberately separate so externally captured RGB-D pairs can be pushed
through the water model unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .pose import Pose

_CHANNELS = "RGB"

# Authored defaults, not measured coefficients: red is absorbed fastest,
# veiling color shifts blue -> green -> brown as turbidity rises.
WATER_PRESETS = {
    "clear": {
        "beta_attn": (0.35, 0.08, 0.05),
        "beta_bs": (0.02, 0.03, 0.035),
        "B_inf": (0.05, 0.25, 0.45),
    },
    "coastal": {
        "beta_attn": (0.45, 0.18, 0.12),
        "beta_bs": (0.06, 0.08, 0.07),
        "B_inf": (0.10, 0.35, 0.40),
    },
    "turbid": {
        "beta_attn": (0.80, 0.45, 0.35),
        "beta_bs": (0.18, 0.20, 0.16),
        "B_inf": (0.25, 0.40, 0.35),
    },
}

DEFAULT_MAX_WATER_RANGE = 50.0  # [m] substituted for no-hit depth pixels


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"image size must be >= 1x1, got {self.width}x{self.height}")
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ConfigError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}")

    @classmethod
    def simple(cls, width: int, height: int, hfov_deg: float = 60.0) -> "CameraIntrinsics":
        """Square-pixel intrinsics from a horizontal field of view."""
        f = (width / 2.0) / np.tan(np.radians(hfov_deg) / 2.0)
        return cls(width, height, f, f, width / 2.0, height / 2.0)


def _check_triple(name: str, value, lo: float, hi: float | None):
    vals = tuple(float(v) for v in value)
    if len(vals) != 3:
        raise ConfigError(f"{name} must have three channels, got {value!r}")
    for ch, v in zip(_CHANNELS, vals):
        if not np.isfinite(v) or v < lo or (hi is not None and v > hi):
            bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
            raise ConfigError(f"{name}.{ch} must be finite and {bound}, got {v}")
    return vals


@dataclass(frozen=True)
class WaterColumnParams:
    """Per-channel attenuation, backscatter, and veiling light.

    beta_attn and beta_bs are in 1/meter, B_inf is the [0, 1] color the
    water converges to at infinite range.
    """

    beta_attn: tuple = (0.35, 0.08, 0.05)
    beta_bs: tuple = (0.02, 0.03, 0.035)
    B_inf: tuple = (0.05, 0.25, 0.45)

    def __post_init__(self):
        object.__setattr__(self, "beta_attn", _check_triple("beta_attn", self.beta_attn, 0.0, None))
        object.__setattr__(self, "beta_bs", _check_triple("beta_bs", self.beta_bs, 0.0, None))
        object.__setattr__(self, "B_inf", _check_triple("B_inf", self.B_inf, 0.0, 1.0))

    def to_dict(self) -> dict:
        return {"beta_attn": list(self.beta_attn),
                "beta_bs": list(self.beta_bs),
                "B_inf": list(self.B_inf)}


def water_preset(name: str) -> WaterColumnParams:
    if name not in WATER_PRESETS:
        known = ", ".join(sorted(WATER_PRESETS))
        raise ConfigError(f"unknown water preset '{name}' (known: {known})")
    return WaterColumnParams(**WATER_PRESETS[name])


def load_water_params(path) -> WaterColumnParams:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read water params {p}: {exc}") from exc
    return water_params_from_dict(doc, source=str(p))


def water_params_from_dict(doc: dict, source: str = "<dict>") -> WaterColumnParams:
    values = {}
    if "preset" in doc:
        preset = doc["preset"]
        if preset not in WATER_PRESETS:
            raise ConfigError(f"{source}: unknown water preset '{preset}'")
        values.update(WATER_PRESETS[preset])
    for key in ("beta_attn", "beta_bs", "B_inf"):
        if key in doc:
            values[key] = doc[key]
    missing = [k for k in ("beta_attn", "beta_bs", "B_inf") if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing field(s) {', '.join(missing)}")
    try:
        return WaterColumnParams(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def save_water_params(params: WaterColumnParams, path):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(params.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LightConfig:
    """One directional light plus an ambient floor; Lambertian shading only."""

    direction: tuple = (0.0, 0.0, -1.0)  # travel direction of the light, world frame
    intensity: float = 0.8
    ambient: float = 0.2
    background: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if not n > 0:
            raise ConfigError("light direction must be non-zero")
        object.__setattr__(self, "direction", tuple(d / n))
        if self.intensity < 0 or self.ambient < 0:
            raise ConfigError("light intensity and ambient must be >= 0")
        object.__setattr__(self, "background",
                           tuple(float(c) for c in self.background))


class ImagePair:
    """An in-air RGB image with its aligned depth image.

    rgb is (H, W, 3) float32 in [0, 1]; depth is (H, W) float32 meters with
    0 marking pixels where no surface was hit.
    """

    def __init__(self, rgb, depth):
        rgb = np.ascontiguousarray(rgb, dtype=np.float32)
        depth = np.ascontiguousarray(depth, dtype=np.float32)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ConfigError(f"rgb must be (H, W, 3), got {rgb.shape}")
        if depth.shape != rgb.shape[:2]:
            raise ConfigError(
                f"depth shape {depth.shape} does not match rgb shape {rgb.shape[:2]}")
        if not np.isfinite(rgb).all() or rgb.min() < 0 or rgb.max() > 1:
            raise ConfigError("rgb values must be finite and within [0, 1]")
        if not np.isfinite(depth).all() or depth.min() < 0:
            raise ConfigError("depth values must be finite and >= 0")
        self.rgb = rgb
        self.depth = depth

    @property
    def shape(self):
        return self.depth.shape


def pixel_ray_directions(intrinsics: CameraIntrinsics) -> np.ndarray:
    """Unit ray directions through every pixel center, camera frame.

    Camera frame follows the usual vision convention: +z forward through the
    lens, +x right, +y down.
    """
    xs = (np.arange(intrinsics.width, dtype=np.float64) + 0.5 - intrinsics.cx) / intrinsics.fx
    ys = (np.arange(intrinsics.height, dtype=np.float64) + 0.5 - intrinsics.cy) / intrinsics.fy
    gx, gy = np.meshgrid(xs, ys)
    dirs = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs


def render_in_air(scene, pose: Pose, intrinsics: CameraIntrinsics,
                  lighting: LightConfig = LightConfig(),
                  depth_convention: str = "range",
                  max_range: float = np.inf) -> ImagePair:
    """Primary-ray render: Lambertian RGB plus a depth image.

    depth_convention "range" stores Euclidean distance along the ray;
    "z" stores the planar depth (distance projected on the optical axis).
    scene may be None for an empty world, which yields background color
    everywhere and all-zero depth.
    """
    if depth_convention not in ("range", "z"):
        raise ConfigError(f"depth_convention must be 'range' or 'z', got {depth_convention!r}")
    h, w = intrinsics.height, intrinsics.width
    dirs_cam = pixel_ray_directions(intrinsics)
    if scene is None:
        rgb = np.broadcast_to(np.asarray(lighting.background, dtype=np.float32),
                              (h, w, 3)).copy()
        return ImagePair(rgb, np.zeros((h, w), dtype=np.float32))

    rot = pose.rotation()
    dirs_world = (dirs_cam.reshape(-1, 3) @ rot.T)
    origins = np.broadcast_to(pose.position, dirs_world.shape)
    t, tri = scene.bvh.cast(origins, dirs_world, t_max=float(max_range))

    hit = tri >= 0
    rgb = np.empty((h * w, 3), dtype=np.float64)
    rgb[:] = lighting.background
    depth = np.zeros(h * w, dtype=np.float64)

    if hit.any():
        tri_h = tri[hit]
        normals = scene.tri_normal[tri_h]
        d_h = dirs_world[hit]
        # orient normals toward the camera before shading
        facing = np.einsum("ij,ij->i", normals, d_h)
        normals = np.where(facing[:, None] > 0, -normals, normals)
        light = np.asarray(lighting.direction)
        lambert = np.maximum(0.0, -(normals @ light))
        shade = lighting.ambient + lighting.intensity * lambert
        rgb[hit] = np.clip(scene.tri_color[tri_h] * shade[:, None], 0.0, 1.0)
        if depth_convention == "range":
            depth[hit] = t[hit]
        else:
            depth[hit] = t[hit] * dirs_cam.reshape(-1, 3)[hit, 2]
    return ImagePair(rgb.reshape(h, w, 3), depth.reshape(h, w))


def water_model(rgb, depth, params: WaterColumnParams, no_hit_depth=None):
    """Per-channel underwater image formation, computed in float64.

    no_hit_depth, when given, replaces the 0 no-hit sentinel in the depth
    image before the formula so open water saturates toward the veiling
    color; when None, depths are used exactly as supplied.
    """
    rgb64 = np.asarray(rgb, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if no_hit_depth is not None:
        d = np.where(d == 0.0, float(no_hit_depth), d)
    d = d[..., None]
    attn = np.exp(-np.asarray(params.beta_attn) * d)
    backscatter = 1.0 - np.exp(-np.asarray(params.beta_bs) * d)
    out = rgb64 * attn + np.asarray(params.B_inf) * backscatter
    return np.clip(out, 0.0, 1.0)


def apply_water_effects(pair, params: WaterColumnParams, no_hit_depth=None):
    """Underwater RGB image from an in-air pair (rendered or external)."""
    if isinstance(pair, ImagePair):
        rgb, depth = pair.rgb, pair.depth
    else:
        rgb, depth = pair
    return water_model(rgb, depth, params, no_hit_depth=no_hit_depth)
