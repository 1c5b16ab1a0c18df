"""Color-accuracy metric and the sonar throughput benchmark.

The angular error between two RGB vectors ignores uniform brightness
scaling, which is what makes it usable for comparing renders against
reference photos taken under unknown lighting. Patches group pixel
coordinates so the metric runs on mean colors per color-chart patch.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .sonar import SonarConfig, render_sonar


def rgb_angular_error(c1, c2) -> float:
    """Angle in degrees between two RGB vectors, scale-invariant.

    Computed as atan2(|c1 x c2|, c1 . c2), which equals the arccos of the
    normalized dot product but stays accurate near 0 and 180 degrees, where
    arccos loses ~7 digits to rounding. Identical vectors give exactly 0.
    Zero vectors have no direction; passing one is an error.
    """
    a = np.asarray(c1, dtype=np.float64).reshape(3)
    b = np.asarray(c2, dtype=np.float64).reshape(3)
    if not a.any() or not b.any():
        raise ValueError("angular error is undefined for a zero RGB vector")
    return float(np.degrees(np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b)))


@dataclass(frozen=True)
class PatchSpec:
    """Named group of (x, y) pixel coordinates on a color-chart patch."""

    name: str
    pixel_coords: tuple

    def __post_init__(self):
        coords = tuple((int(x), int(y)) for x, y in self.pixel_coords)
        if not coords:
            raise ConfigError(f"patch '{self.name}' has no coordinates")
        object.__setattr__(self, "pixel_coords", coords)


@dataclass(frozen=True)
class PatchErrorReport:
    per_patch: dict          # name -> error degrees
    mean_deg: float
    patch_means: dict        # name -> (reference mean RGB, rendered mean RGB)

    def to_dict(self) -> dict:
        return {
            "per_patch_deg": dict(self.per_patch),
            "mean_deg": self.mean_deg,
            "patch_means": {k: {"reference": list(map(float, r)),
                                "rendered": list(map(float, s))}
                            for k, (r, s) in self.patch_means.items()},
        }


def _patch_mean(image: np.ndarray, patch: PatchSpec) -> np.ndarray:
    h, w = image.shape[:2]
    pixels = []
    for x, y in patch.pixel_coords:
        if not (0 <= x < w and 0 <= y < h):
            raise ConfigError(
                f"patch '{patch.name}' coordinate ({x}, {y}) outside image {w}x{h}")
        pixels.append(image[y, x])
    return np.mean(np.asarray(pixels, dtype=np.float64), axis=0)


def patch_error_report(reference, rendered, patches) -> PatchErrorReport:
    """Per-patch angular error between mean colors, plus the unweighted mean."""
    reference = np.asarray(reference, dtype=np.float64)
    rendered = np.asarray(rendered, dtype=np.float64)
    per_patch = {}
    patch_means = {}
    for patch in patches:
        ref_mean = _patch_mean(reference, patch)
        ren_mean = _patch_mean(rendered, patch)
        try:
            per_patch[patch.name] = rgb_angular_error(ref_mean, ren_mean)
        except ValueError as exc:
            raise ValueError(f"patch '{patch.name}': {exc}") from exc
        patch_means[patch.name] = (ref_mean, ren_mean)
    if not per_patch:
        raise ConfigError("no patches supplied")
    mean_deg = float(np.mean(list(per_patch.values())))
    return PatchErrorReport(per_patch, mean_deg, patch_means)


def load_patches(path) -> list:
    """Read a PatchSpec list: {"patches": [{"name": str, "coords": [[x, y], ...]}]}."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read patches {path}: {exc}") from exc
    patches = []
    for k, entry in enumerate(doc.get("patches", [])):
        if "name" not in entry or "coords" not in entry:
            raise ConfigError(f"{path}: patches[{k}] needs 'name' and 'coords'")
        patches.append(PatchSpec(str(entry["name"]),
                                 tuple((c[0], c[1]) for c in entry["coords"])))
    if not patches:
        raise ConfigError(f"{path}: no patches defined")
    return patches


def save_patches(patches, path):
    doc = {"patches": [{"name": p.name, "coords": [list(c) for c in p.pixel_coords]}
                       for p in patches]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class BenchReport:
    scene_name: str
    frames: int
    total_seconds: float
    fps: float
    cache_seconds: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError("benchmark needs frames >= 1")

    def to_dict(self) -> dict:
        return {"scene": self.scene_name, "frames": self.frames,
                "total_seconds": self.total_seconds, "fps": self.fps,
                "cache_seconds": self.cache_seconds, "workers": self.workers}

    def table(self) -> str:
        return (f"scene: {self.scene_name}\n"
                f"frames: {self.frames}\n"
                f"cache seconds: {self.cache_seconds:.1f}\n"
                f"total seconds: {self.total_seconds:.3f}\n"
                f"workers: {self.workers}\n"
                f"fps: {self.fps:.3f}")


def bench_sonar(scene, pose, config: SonarConfig, frames: int = 100,
                workers: int = 1, scene_name: str = "scene") -> BenchReport:
    """Time `frames` full sonar renders at a fixed pose.

    One untimed warm-up frame runs first so compilation and cold caches do
    not pollute the steady-state figure. Every timed frame reuses frame
    index 0, so the produced grids are identical and the work per frame is
    constant. cache_seconds is always 0: there is no scene preprocessing
    step to amortize beyond the BVH the scene already owns.
    """
    if frames < 1:
        raise ConfigError("benchmark needs frames >= 1")
    render_sonar(scene, pose, config, workers=workers, frame=0)
    start = time.perf_counter()
    for _ in range(frames):
        render_sonar(scene, pose, config, workers=workers, frame=0)
    elapsed = time.perf_counter() - start
    return BenchReport(scene_name, frames, elapsed, frames / elapsed,
                       cache_seconds=0.0, workers=workers)
