"""Simulation runs: config loading, trajectory playback, dataset recording.

A run plays a timestamped trajectory, fires each configured sensor at its
own rate (the DVL at its adaptive interval), and writes a dataset under the
output directory with one subdirectory per sensor, per-sensor index CSVs,
and a manifest listing every file. Two runs with the same config and seed
produce byte-identical sensor payloads; only the manifest's wall-clock
field differs.
"""

from __future__ import annotations

import csv
import json
import shutil
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import imgio
from .camera import (CameraIntrinsics, LightConfig, WaterColumnParams,
                     apply_water_effects, render_in_air, water_params_from_dict,
                     DEFAULT_MAX_WATER_RANGE)
from .errors import ConfigError
from .navsensors import (BarometerConfig, DvlConfig, sample_barometer, sample_dvl)
from .pose import Pose, quat_slerp
from .rng import sensor_stream_seed
from .scene import assign_semantic_materials, load_material_table, load_scene
from .sonar import SonarConfig, render_sonar, sonar_config_from_dict

TRAJECTORY_HEADER = "t,x,y,z,qw,qx,qy,qz,vx,vy,vz"
_TIME_EPS = 1e-9  # a sensor still fires when floating point lands this close past t_end
_SENSOR_DIRS = ("camera", "sonar", "dvl", "baro")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray        # (n,) seconds, strictly increasing
    poses: tuple             # n Pose objects
    velocities: np.ndarray   # (n, 3) body-frame m/s

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.size < 1:
            raise ConfigError("trajectory needs at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "velocities",
                           np.asarray(self.velocities, dtype=np.float64).reshape(-1, 3))
        if len(self.poses) != t.size or self.velocities.shape[0] != t.size:
            raise ConfigError("trajectory arrays must have matching lengths")

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])


def load_trajectory(path) -> Trajectory:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory {p}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != TRAJECTORY_HEADER.split(","):
        raise ConfigError(f"{p}: first line must be '{TRAJECTORY_HEADER}'")
    times, poses, vels = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 11:
            raise ConfigError(f"{p}:{ln}: expected 11 columns, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise ConfigError(f"{p}:{ln}: non-numeric value: {exc}") from exc
        times.append(vals[0])
        poses.append(Pose(np.array(vals[1:4]), tuple(vals[4:8])))
        vels.append(vals[8:11])
    return Trajectory(np.array(times), tuple(poses), np.array(vels))


def save_trajectory(traj: Trajectory, path):
    lines = [TRAJECTORY_HEADER]
    for t, pose, vel in zip(traj.times, traj.poses, traj.velocities):
        q = pose.orientation
        vals = [t, *pose.position, q[0], q[1], q[2], q[3], *vel]
        lines.append(",".join(repr(float(v)) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def interpolate_pose(traj: Trajectory, t: float):
    """Pose and velocity at time t: lerp position/velocity, slerp orientation.

    t must lie within the trajectory span; knot timestamps return their
    sample exactly.
    """
    times = traj.times
    if t < times[0] or t > times[-1]:
        raise ValueError(
            f"t={t} outside trajectory span [{times[0]}, {times[-1]}]")
    k = int(np.searchsorted(times, t, side="right")) - 1
    if k >= times.size - 1:
        k = times.size - 2 if times.size > 1 else 0
    if t == times[k]:
        return traj.poses[k], traj.velocities[k].copy()
    if times.size == 1 or t == times[k + 1]:
        kk = k if times.size == 1 else k + 1
        return traj.poses[kk], traj.velocities[kk].copy()
    s = (t - times[k]) / (times[k + 1] - times[k])
    p0, p1 = traj.poses[k], traj.poses[k + 1]
    position = (1.0 - s) * p0.position + s * p1.position
    orientation = quat_slerp(p0.orientation, p1.orientation, s)
    velocity = (1.0 - s) * traj.velocities[k] + s * traj.velocities[k + 1]
    return Pose(position, orientation), velocity


@dataclass(frozen=True)
class CameraSection:
    intrinsics: CameraIntrinsics
    water: WaterColumnParams
    rate_hz: float
    depth_convention: str = "range"
    max_water_range: float = DEFAULT_MAX_WATER_RANGE
    light: LightConfig = field(default_factory=LightConfig)


@dataclass(frozen=True)
class SonarSection:
    config: SonarConfig
    rate_hz: float


@dataclass(frozen=True)
class BarometerSection:
    config: BarometerConfig
    rate_hz: float


@dataclass(frozen=True)
class SimConfig:
    scene_path: str
    seed: int = 0
    output_dir: str = "out"
    material_table_path: str = None
    camera: CameraSection = None
    sonar: SonarSection = None
    dvl: DvlConfig = None
    barometer: BarometerSection = None
    water_surface_z: float = 0.0

    def to_dict(self) -> dict:
        doc = {"scene": self.scene_path, "seed": self.seed,
               "output_dir": self.output_dir,
               "water_surface_z": self.water_surface_z}
        if self.material_table_path:
            doc["material_table"] = self.material_table_path
        if self.camera:
            c = self.camera
            doc["camera"] = {
                "rate_hz": c.rate_hz,
                "width": c.intrinsics.width, "height": c.intrinsics.height,
                "fx": c.intrinsics.fx, "fy": c.intrinsics.fy,
                "cx": c.intrinsics.cx, "cy": c.intrinsics.cy,
                "water": c.water.to_dict(),
                "depth_convention": c.depth_convention,
                "max_water_range": c.max_water_range,
                "light": {"direction": list(c.light.direction),
                          "intensity": c.light.intensity,
                          "ambient": c.light.ambient,
                          "background": list(c.light.background)},
            }
        if self.sonar:
            doc["sonar"] = {"rate_hz": self.sonar.rate_hz, **self.sonar.config.to_dict()}
        if self.dvl:
            doc["dvl"] = {
                "janus_angle": self.dvl.janus_angle,
                "max_beam_range": self.dvl.max_beam_range,
                "velocity_noise_std": self.dvl.velocity_noise_std,
                "rate_curve": [list(b) for b in self.dvl.rate_curve],
                "min_valid_beams": self.dvl.min_valid_beams,
            }
        if self.barometer:
            b = self.barometer
            doc["barometer"] = {
                "rate_hz": b.rate_hz,
                "atmospheric_pressure": b.config.atmospheric_pressure,
                "water_density": b.config.water_density,
                "gravity": b.config.gravity,
                "noise_std": b.config.noise_std,
            }
        return doc


def _require_rate(section: dict, name: str) -> float:
    rate = section.get("rate_hz")
    if rate is None or not float(rate) > 0:
        raise ConfigError(f"{name}.rate_hz must be a positive number, got {rate!r}")
    return float(rate)


def sim_config_from_dict(doc: dict, base_dir: Path = None,
                         source: str = "<dict>") -> SimConfig:
    base = Path(base_dir) if base_dir is not None else Path(".")
    if "scene" not in doc:
        raise ConfigError(f"{source}: missing 'scene'")
    scene_path = str(base / doc["scene"]) if not Path(doc["scene"]).is_absolute() \
        else doc["scene"]
    if not Path(scene_path).is_file():
        raise ConfigError(f"{source}: scene file not found: {scene_path}")

    material_table_path = None
    if doc.get("material_table"):
        mt = doc["material_table"]
        material_table_path = str(base / mt) if not Path(mt).is_absolute() else mt
        if not Path(material_table_path).is_file():
            raise ConfigError(f"{source}: material table not found: {material_table_path}")

    camera = None
    if "camera" in doc:
        c = doc["camera"]
        rate = _require_rate(c, "camera")
        intr = CameraIntrinsics(int(c.get("width", 640)), int(c.get("height", 480)),
                                float(c.get("fx", 500.0)), float(c.get("fy", 500.0)),
                                float(c.get("cx", c.get("width", 640) / 2.0)),
                                float(c.get("cy", c.get("height", 480) / 2.0)))
        water = water_params_from_dict(c.get("water", {"preset": "clear"}),
                                       source=f"{source}: camera.water")
        light_doc = c.get("light", {})
        light = LightConfig(
            direction=tuple(light_doc.get("direction", (0.0, 0.0, -1.0))),
            intensity=float(light_doc.get("intensity", 0.8)),
            ambient=float(light_doc.get("ambient", 0.2)),
            background=tuple(light_doc.get("background", (0.0, 0.0, 0.0))))
        camera = CameraSection(intr, water, rate,
                               depth_convention=c.get("depth_convention", "range"),
                               max_water_range=float(c.get("max_water_range",
                                                           DEFAULT_MAX_WATER_RANGE)),
                               light=light)

    sonar = None
    if "sonar" in doc:
        s = dict(doc["sonar"])
        rate = _require_rate(s, "sonar")
        s.pop("rate_hz")
        sonar = SonarSection(sonar_config_from_dict(s, source=f"{source}: sonar"), rate)

    dvl = None
    if "dvl" in doc:
        d = dict(doc["dvl"])
        d.pop("rate_hz", None)  # DVL rate is adaptive, not configured
        if "rate_curve" in d:
            d["rate_curve"] = tuple(tuple(b) for b in d["rate_curve"])
        try:
            dvl = DvlConfig(**d)
        except TypeError as exc:
            raise ConfigError(f"{source}: bad dvl section: {exc}") from exc

    barometer = None
    if "barometer" in doc:
        b = dict(doc["barometer"])
        rate = _require_rate(b, "barometer")
        b.pop("rate_hz")
        try:
            barometer = BarometerSection(BarometerConfig(**b), rate)
        except TypeError as exc:
            raise ConfigError(f"{source}: bad barometer section: {exc}") from exc

    return SimConfig(
        scene_path=scene_path,
        seed=int(doc.get("seed", 0)),
        output_dir=str(doc.get("output_dir", "out")),
        material_table_path=material_table_path,
        camera=camera, sonar=sonar, dvl=dvl, barometer=barometer,
        water_surface_z=float(doc.get("water_surface_z", 0.0)),
    )


def load_sim_config(path) -> SimConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return sim_config_from_dict(doc, base_dir=p.parent, source=str(p))


def load_scene_for_config(config: SimConfig):
    if config.material_table_path:
        by_id, object_labels, by_label = load_material_table(config.material_table_path)
        scene = load_scene(config.scene_path, by_id)
        if object_labels and by_label:
            labeled = {oid: lbl for oid, lbl in object_labels.items() if lbl in by_label}
            scene = assign_semantic_materials(scene, labeled, by_label)
        return scene
    return load_scene(config.scene_path)


def _fixed_rate_times(t0: float, t1: float, rate_hz: float) -> list:
    times = []
    k = 0
    while True:
        t = t0 + k / rate_hz
        if t > t1 + _TIME_EPS:
            break
        times.append(t)
        k += 1
    return times


def _fmt(v) -> str:
    return repr(float(v))


def run_simulation(config: SimConfig, traj: Trajectory, workers: int = 1,
                   overwrite: bool = False) -> dict:
    """Play the trajectory, record every configured sensor, write the manifest.

    The output directory must be empty or absent unless overwrite is set, in
    which case previously recorded sensor artifacts are removed first.
    Fixed-rate sensors fire at t_start + k/rate for every grid point within
    the span (both endpoints included); the DVL advances by each ping's own
    next_interval.
    """
    out = Path(config.output_dir)
    existing = [p for p in out.iterdir()] if out.is_dir() else []
    if existing and not overwrite:
        raise ConfigError(f"output directory {out} is not empty (use overwrite)")
    if existing:
        for name in _SENSOR_DIRS:
            shutil.rmtree(out / name, ignore_errors=True)
        (out / "manifest.json").unlink(missing_ok=True)

    scene = load_scene_for_config(config)  # abort here if assets are missing
    out.mkdir(parents=True, exist_ok=True)

    files = []  # manifest entries, appended in deterministic order

    if config.camera:
        cam_dir = out / "camera"
        cam_dir.mkdir(exist_ok=True)
        rows = []
        for k, t in enumerate(_fixed_rate_times(traj.start, traj.end,
                                                config.camera.rate_hz)):
            pose, _ = interpolate_pose(traj, t)
            pair = render_in_air(scene, pose, config.camera.intrinsics,
                                 config.camera.light,
                                 depth_convention=config.camera.depth_convention)
            wet = apply_water_effects(pair, config.camera.water,
                                      no_hit_depth=config.camera.max_water_range)
            names = (f"{k:06d}_rgb.png", f"{k:06d}_depth.bin", f"{k:06d}_uw.png")
            imgio.save_png(pair.rgb, cam_dir / names[0])
            imgio.save_depth(pair.depth, cam_dir / names[1])
            imgio.save_png(wet, cam_dir / names[2])
            for n in names:
                files.append({"path": f"camera/{n}", "sensor": "camera", "t": t})
            rows.append([_fmt(t), *names])
        _write_index(cam_dir / "index.csv", "t,rgb,depth,underwater", rows)
        files.append({"path": "camera/index.csv", "sensor": "camera", "t": None})

    if config.sonar:
        son_dir = out / "sonar"
        son_dir.mkdir(exist_ok=True)
        sonar_cfg = replace(config.sonar.config,
                            seed=sensor_stream_seed(config.seed, "sonar"))
        rows = []
        for k, t in enumerate(_fixed_rate_times(traj.start, traj.end,
                                                config.sonar.rate_hz)):
            pose, _ = interpolate_pose(traj, t)
            grid = render_sonar(scene, pose, sonar_cfg, workers=workers, frame=k)
            png_name, csv_name = f"{k:06d}_polar.png", f"{k:06d}_polar.csv"
            imgio.save_png(np.clip(grid.intensities, 0.0, 1.0), son_dir / png_name)
            imgio.save_grid_csv(grid.intensities, son_dir / csv_name)
            files.append({"path": f"sonar/{png_name}", "sensor": "sonar", "t": t})
            files.append({"path": f"sonar/{csv_name}", "sensor": "sonar", "t": t})
            rows.append([_fmt(t), png_name, csv_name])
        _write_index(son_dir / "index.csv", "t,png,csv", rows)
        files.append({"path": "sonar/index.csv", "sensor": "sonar", "t": None})

    if config.dvl:
        dvl_dir = out / "dvl"
        dvl_dir.mkdir(exist_ok=True)
        dvl_cfg = replace(config.dvl, seed=sensor_stream_seed(config.seed, "dvl"))
        rows = []
        t = traj.start
        k = 0
        while t <= traj.end + _TIME_EPS:
            pose, vel = interpolate_pose(traj, min(t, traj.end))
            m = sample_dvl(scene, pose, vel, dvl_cfg, time=t, sample_index=k)
            v = [_fmt(x) for x in m.velocity] if m.valid else ["", "", ""]
            rows.append([_fmt(t), *v,
                         *[_fmt(r) for r in m.beam_ranges],
                         *[str(int(f)) for f in m.beam_valid],
                         str(int(m.valid)), _fmt(m.next_interval)])
            t += m.next_interval
            k += 1
        _write_index(dvl_dir / "measurements.csv",
                     "t,vx,vy,vz,r0,r1,r2,r3,b0,b1,b2,b3,valid,next_interval", rows)
        files.append({"path": "dvl/measurements.csv", "sensor": "dvl", "t": None})

    if config.barometer:
        baro_dir = out / "baro"
        baro_dir.mkdir(exist_ok=True)
        baro_cfg = replace(config.barometer.config,
                           seed=sensor_stream_seed(config.seed, "baro"))
        rows = []
        for k, t in enumerate(_fixed_rate_times(traj.start, traj.end,
                                                config.barometer.rate_hz)):
            pose, _ = interpolate_pose(traj, t)
            depth = max(0.0, config.water_surface_z - float(pose.position[2]))
            pressure = sample_barometer(depth, baro_cfg, sample_index=k)
            rows.append([_fmt(t), _fmt(pressure)])
        _write_index(baro_dir / "measurements.csv", "t,pressure_pa", rows)
        files.append({"path": "baro/measurements.csv", "sensor": "baro", "t": None})

    manifest = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "seed": config.seed,
        "workers": workers,
        "config": config.to_dict(),
        "trajectory": {"start": traj.start, "end": traj.end,
                       "samples": int(traj.times.size)},
        "files": files,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _write_index(path: Path, header: str, rows):
    lines = [header] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def verify_manifest(out_dir) -> tuple:
    """Bidirectional completeness check between manifest and directory.

    Returns (ok, missing_on_disk, unreferenced_on_disk) with paths relative
    to out_dir; the manifest itself is exempt.
    """
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"no manifest.json under {out}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    listed = {entry["path"] for entry in manifest["files"]}
    on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()}
    on_disk.discard("manifest.json")
    missing = sorted(listed - on_disk)
    unreferenced = sorted(on_disk - listed)
    return (not missing and not unreferenced), missing, unreferenced
