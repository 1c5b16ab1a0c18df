"""Command-line entry points: render, record, bench, colorcheck, serve."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import imgio
from .camera import apply_water_effects, render_in_air
from .errors import SimError
from .metrics import bench_sonar, load_patches, patch_error_report
from .pipeline import (load_scene_for_config, load_sim_config, load_trajectory,
                       run_simulation)
from .pose import Pose
from .rng import sensor_stream_seed
from .sonar import project_fan_image, render_sonar


def _parse_pose(text: str) -> Pose:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 7:
        raise SimError(f"pose must be 'x,y,z,qw,qx,qy,qz', got {text!r}")
    return Pose(np.array(vals[:3]), tuple(vals[3:]))


def _load_config(args):
    config = load_sim_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if getattr(args, "out", None):
        config = dataclasses.replace(config, output_dir=args.out)
    return config


def _cmd_render(args) -> int:
    config = _load_config(args)
    scene = load_scene_for_config(config)
    pose = _parse_pose(args.pose)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []

    if config.camera:
        pair = render_in_air(scene, pose, config.camera.intrinsics,
                             config.camera.light,
                             depth_convention=config.camera.depth_convention)
        wet = apply_water_effects(pair, config.camera.water,
                                  no_hit_depth=config.camera.max_water_range)
        imgio.save_png(pair.rgb, out / "rgb.png")
        imgio.save_depth(pair.depth, out / "depth.bin")
        imgio.save_png(wet, out / "underwater.png")
        wrote += ["rgb.png", "depth.bin", "underwater.png"]

    if config.sonar:
        sonar_cfg = dataclasses.replace(config.sonar.config,
                                        seed=sensor_stream_seed(config.seed, "sonar"))
        grid = render_sonar(scene, pose, sonar_cfg, workers=args.workers, frame=0)
        imgio.save_png(np.clip(grid.intensities, 0.0, 1.0), out / "polar.png")
        imgio.save_grid_csv(grid.intensities, out / "polar.csv")
        fan_w, fan_h = (int(v) for v in args.fan_size.split("x"))
        imgio.save_png(np.clip(project_fan_image(grid, sonar_cfg, fan_w, fan_h), 0.0, 1.0),
                       out / "fan.png")
        wrote += ["polar.png", "polar.csv", "fan.png"]

    if not wrote:
        raise SimError("config has neither a camera nor a sonar section")
    print(f"wrote {', '.join(wrote)} to {out}")
    return 0


def _cmd_record(args) -> int:
    config = _load_config(args)
    traj = load_trajectory(args.trajectory)
    manifest = run_simulation(config, traj, workers=args.workers,
                              overwrite=args.overwrite)
    print(f"recorded {len(manifest['files'])} files to {config.output_dir}")
    return 0


def _cmd_bench(args) -> int:
    config = _load_config(args)
    if config.sonar is None:
        raise SimError("bench needs a sonar section in the config")
    scene = load_scene_for_config(config)
    pose = _parse_pose(args.pose)
    sonar_cfg = dataclasses.replace(config.sonar.config,
                                    seed=sensor_stream_seed(config.seed, "sonar"))
    report = bench_sonar(scene, pose, sonar_cfg, frames=args.frames,
                         workers=args.workers,
                         scene_name=Path(config.scene_path).name)
    print(report.table())
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                                     encoding="utf-8")
        print(f"report written to {args.report}")
    return 0


def _cmd_colorcheck(args) -> int:
    reference = imgio.load_png(args.reference)
    rendered = imgio.load_png(args.rendered)
    patches = load_patches(args.patches)
    report = patch_error_report(reference, rendered, patches)
    width = max(len(name) for name in report.per_patch)
    for name, deg in report.per_patch.items():
        print(f"{name.ljust(width)}  {deg:8.3f} deg")
    print(f"{'mean'.ljust(width)}  {report.mean_deg:8.3f} deg")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                                     encoding="utf-8")
        print(f"report written to {args.report}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    static = args.static
    if static is None and Path("frontend/dist").is_dir():
        static = "frontend/dist"
    app = create_app(static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seatrace",
        description="underwater perception simulator: camera, sonar, DVL, barometer")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="simulation config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=1, help="render worker threads")
        p.add_argument("--out", default=None, help="override the output directory")

    p = sub.add_parser("render", help="render one frame at a fixed pose")
    add_common(p)
    p.add_argument("--pose", default="0,0,0,1,0,0,0", help="x,y,z,qw,qx,qy,qz")
    p.add_argument("--fan-size", default="800x400", help="fan image WxH")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("record", help="play a trajectory and record a dataset")
    add_common(p)
    p.add_argument("--trajectory", required=True, help="trajectory CSV")
    p.add_argument("--overwrite", action="store_true",
                   help="clear previous sensor output in the target directory")
    p.set_defaults(func=_cmd_record)

    p = sub.add_parser("bench", help="sonar throughput benchmark")
    add_common(p)
    p.add_argument("--pose", default="0,0,0,1,0,0,0", help="x,y,z,qw,qx,qy,qz")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--report", default=None, help="also write the report as JSON")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("colorcheck", help="RGB angular error over color patches")
    p.add_argument("--reference", required=True, help="reference PNG")
    p.add_argument("--rendered", required=True, help="rendered PNG")
    p.add_argument("--patches", required=True, help="patch coordinates JSON")
    p.add_argument("--report", default=None, help="also write the report as JSON")
    p.set_defaults(func=_cmd_colorcheck)

    p = sub.add_parser("serve", help="run the water tuning service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None, help="built frontend directory to serve")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
