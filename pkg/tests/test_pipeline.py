import json

import numpy as np
import pytest

from seatrace.errors import ConfigError
from seatrace.pipeline import (
    TRAJECTORY_HEADER,
    Trajectory,
    interpolate_pose,
    load_sim_config,
    load_trajectory,
    run_simulation,
    save_trajectory,
    sim_config_from_dict,
    verify_manifest,
)
from seatrace.pose import Pose, quat_from_yaw

import helpers

IDENT = (1.0, 0.0, 0.0, 0.0)


def two_point_traj(t0=0.0, t1=2.0):
    return Trajectory(
        np.array([t0, t1]),
        (Pose([0, 0, -5]), Pose([2, 0, -5], quat_from_yaw(np.pi / 2))),
        np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    )


# --- trajectory -----------------------------------------------------------


def test_trajectory_validation():
    with pytest.raises(ConfigError, match="strictly increasing"):
        Trajectory(np.array([0.0, 0.0]), (Pose(), Pose()), np.zeros((2, 3)))
    with pytest.raises(ConfigError, match="matching lengths"):
        Trajectory(np.array([0.0, 1.0]), (Pose(),), np.zeros((2, 3)))


def test_trajectory_csv_round_trip(tmp_path):
    traj = two_point_traj()
    p = tmp_path / "traj.csv"
    save_trajectory(traj, p)
    assert p.read_text().splitlines()[0] == TRAJECTORY_HEADER
    loaded = load_trajectory(p)
    assert np.array_equal(loaded.times, traj.times)
    assert np.array_equal(loaded.velocities, traj.velocities)
    for a, b in zip(loaded.poses, traj.poses):
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.orientation, b.orientation)


def test_trajectory_header_and_row_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,x,y,z\n0,0,0,0\n")
    with pytest.raises(ConfigError, match="first line must be"):
        load_trajectory(p)
    p.write_text(TRAJECTORY_HEADER + "\n0,0,0,0,1,0,0,0,0,0\n")
    with pytest.raises(ConfigError, match=":2: expected 11 columns"):
        load_trajectory(p)
    p.write_text(TRAJECTORY_HEADER + "\n0,0,0,z,1,0,0,0,0,0,0\n")
    with pytest.raises(ConfigError, match=":2: non-numeric"):
        load_trajectory(p)


# --- interpolation --------------------------------------------------------


def test_interpolate_knot_identity():
    traj = two_point_traj()
    pose, vel = interpolate_pose(traj, 0.0)
    assert pose is traj.poses[0]
    assert np.array_equal(vel, [1, 0, 0])
    pose_end, _ = interpolate_pose(traj, 2.0)
    assert pose_end is traj.poses[1]


def test_interpolate_midpoint_linear():
    traj = Trajectory(
        np.array([0.0, 1.0]),
        (Pose([0, 0, 0]), Pose([2, 0, 0])),
        np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
    )
    pose, vel = interpolate_pose(traj, 0.5)
    assert np.allclose(pose.position, [1, 0, 0], atol=1e-12)
    assert np.allclose(vel, [1, 0, 0], atol=1e-12)


def test_interpolate_midpoint_yaw_slerp():
    traj = Trajectory(
        np.array([0.0, 1.0]),
        (Pose(), Pose(orientation=quat_from_yaw(np.pi / 2))),
        np.zeros((2, 3)),
    )
    pose, _ = interpolate_pose(traj, 0.5)
    expect = quat_from_yaw(np.pi / 4)
    assert np.abs(pose.orientation - expect).max() <= 1e-9


def test_interpolate_outside_span_raises():
    traj = two_point_traj()
    with pytest.raises(ValueError, match="outside trajectory span"):
        interpolate_pose(traj, -0.1)
    with pytest.raises(ValueError, match="outside trajectory span"):
        interpolate_pose(traj, 2.1)


# --- config ---------------------------------------------------------------


def write_scene_obj(tmp_path):
    return helpers.write_obj(
        tmp_path / "scene.obj",
        "o floor\nv -50 -50 -10\nv 50 -50 -10\nv 50 50 -10\nv -50 50 -10\nf 1 2 3\nf 1 3 4\n",
    )


def minimal_config_doc(tmp_path, **extra):
    write_scene_obj(tmp_path)
    doc = {"scene": "scene.obj", "seed": 11, "output_dir": str(tmp_path / "out")}
    doc.update(extra)
    return doc


def test_sim_config_requires_existing_scene(tmp_path):
    with pytest.raises(ConfigError, match="scene file not found"):
        sim_config_from_dict({"scene": "nope.obj"}, base_dir=tmp_path)


def test_sim_config_rate_validation(tmp_path):
    doc = minimal_config_doc(tmp_path, camera={"rate_hz": 0})
    with pytest.raises(ConfigError, match="camera.rate_hz"):
        sim_config_from_dict(doc, base_dir=tmp_path)
    doc = minimal_config_doc(tmp_path, barometer={})
    with pytest.raises(ConfigError, match="barometer.rate_hz"):
        sim_config_from_dict(doc, base_dir=tmp_path)


def test_sim_config_json_load_and_echo(tmp_path):
    doc = minimal_config_doc(
        tmp_path,
        camera={"rate_hz": 4, "width": 64, "height": 48, "water": {"preset": "clear"}},
        sonar={"rate_hz": 2, "rays_azimuth": 64, "rays_elevation": 8,
               "bins_range": 32, "bins_azimuth": 16,
               "noise": {"enabled": False}, "normalization": "none"},
        dvl={"velocity_noise_std": 0.0},
        barometer={"rate_hz": 5},
    )
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(doc))
    cfg = load_sim_config(cfg_path)
    assert cfg.seed == 11
    assert cfg.camera.intrinsics.width == 64
    assert cfg.sonar.config.rays_azimuth == 64
    assert cfg.dvl.velocity_noise_std == 0.0
    assert cfg.barometer.rate_hz == 5
    echo = cfg.to_dict()
    assert echo["camera"]["rate_hz"] == 4
    assert echo["sonar"]["rays_azimuth"] == 64


# --- recording ------------------------------------------------------------


@pytest.fixture()
def recording_setup(tmp_path):
    doc = minimal_config_doc(
        tmp_path,
        camera={"rate_hz": 10, "width": 24, "height": 18, "fx": 20, "fy": 20,
                "water": {"preset": "clear"}},
        sonar={"rate_hz": 5, "rays_azimuth": 64, "rays_elevation": 8,
               "bins_range": 32, "bins_azimuth": 16, "range_max": 40.0,
               "noise": {"enabled": True}, "normalization": "range_wise"},
        dvl={"velocity_noise_std": 0.01},
        barometer={"rate_hz": 10, "noise_std": 25.0},
    )
    cfg = sim_config_from_dict(doc, base_dir=tmp_path)
    traj = Trajectory(
        np.array([0.0, 1.0]),
        (Pose([0, 0, -5]), Pose([0.5, 0, -5])),
        np.array([[0.5, 0, 0], [0.5, 0, 0]]),
    )
    return cfg, traj


def test_record_layout_counts_and_manifest(recording_setup):
    cfg, traj = recording_setup
    manifest = run_simulation(cfg, traj)
    out = cfg.output_dir
    from pathlib import Path

    # boundary-inclusive: 1 s at 10 Hz -> 11 camera frames, at 5 Hz -> 6 sonar frames
    assert len(list(Path(out).glob("camera/*_rgb.png"))) == 11
    assert len(list(Path(out).glob("camera/*_depth.bin"))) == 11
    assert len(list(Path(out).glob("camera/*_uw.png"))) == 11
    assert len(list(Path(out).glob("sonar/*_polar.png"))) == 6
    ok, missing, unreferenced = verify_manifest(out)
    assert ok, (missing, unreferenced)
    assert manifest["seed"] == 11
    # camera timestamps form the documented arithmetic grid
    cam_index = (Path(out) / "camera" / "index.csv").read_text().splitlines()
    ts = [float(r.split(",")[0]) for r in cam_index[1:]]
    assert np.abs(np.diff(ts) - 0.1).max() <= 1e-9


def test_record_refuses_nonempty_output(recording_setup):
    cfg, traj = recording_setup
    run_simulation(cfg, traj)
    with pytest.raises(ConfigError, match="not empty"):
        run_simulation(cfg, traj)
    run_simulation(cfg, traj, overwrite=True)  # explicit overwrite allowed


def test_record_reproducible_and_worker_independent(recording_setup, tmp_path):
    cfg, traj = recording_setup
    from dataclasses import replace
    from pathlib import Path

    out_a = replace(cfg, output_dir=str(tmp_path / "a"))
    out_b = replace(cfg, output_dir=str(tmp_path / "b"))
    out_c = replace(cfg, output_dir=str(tmp_path / "c"))
    run_simulation(out_a, traj, workers=1)
    run_simulation(out_b, traj, workers=1)
    run_simulation(out_c, traj, workers=3)

    payloads = sorted(
        str(p.relative_to(tmp_path / "a"))
        for p in (tmp_path / "a").rglob("*")
        if p.is_file() and p.name != "manifest.json"
    )
    assert payloads
    for rel in payloads:
        a = (tmp_path / "a" / rel).read_bytes()
        assert a == (tmp_path / "b" / rel).read_bytes(), rel
        assert a == (tmp_path / "c" / rel).read_bytes(), rel


def test_record_dvl_dropout_rows(tmp_path):
    # bottom far beyond beam range -> all rows invalid with empty velocity cells
    doc = minimal_config_doc(tmp_path, dvl={"max_beam_range": 5.0})
    cfg = sim_config_from_dict(doc, base_dir=tmp_path)
    traj = Trajectory(
        np.array([0.0, 1.0]), (Pose([0, 0, 100]), Pose([0, 0, 100])),
        np.zeros((2, 3)),
    )
    run_simulation(cfg, traj)
    from pathlib import Path

    rows = (Path(cfg.output_dir) / "dvl" / "measurements.csv").read_text().splitlines()
    assert rows[0].startswith("t,vx,vy,vz")
    body = [r.split(",") for r in rows[1:]]
    assert body
    for r in body:
        assert r[1] == "" and r[2] == "" and r[3] == ""  # no velocity on dropout
        assert r[12] == "0"
        assert float(r[13]) == 0.25  # slowest bracket when unlocked


def test_record_dvl_interval_matches_rate_curve(tmp_path):
    doc = minimal_config_doc(tmp_path, dvl={"velocity_noise_std": 0.0})
    cfg = sim_config_from_dict(doc, base_dir=tmp_path)
    traj = Trajectory(
        np.array([0.0, 1.0]), (Pose([0, 0, -5]), Pose([0, 0, -5])), np.zeros((2, 3))
    )
    run_simulation(cfg, traj)  # floor at -10, craft at -5: slant 5.77 m -> 8 Hz
    from pathlib import Path

    rows = (Path(cfg.output_dir) / "dvl" / "measurements.csv").read_text().splitlines()
    ts = [float(r.split(",")[0]) for r in rows[1:]]
    assert np.abs(np.diff(ts) - 0.125).max() <= 1e-9
    assert len(ts) == 9  # 0.0 .. 1.0 inclusive at 8 Hz


def test_manifest_tamper_detection(recording_setup):
    cfg, traj = recording_setup
    run_simulation(cfg, traj)
    from pathlib import Path

    out = Path(cfg.output_dir)
    stray = out / "sonar" / "stray.txt"
    stray.write_text("x")
    ok, missing, unreferenced = verify_manifest(out)
    assert not ok and unreferenced == ["sonar/stray.txt"]
    stray.unlink()
    victim = next(out.glob("camera/*_uw.png"))
    victim.unlink()
    ok, missing, unreferenced = verify_manifest(out)
    assert not ok and missing == [f"camera/{victim.name}"]


def test_record_aborts_before_writes_if_material_table_missing(tmp_path):
    doc = minimal_config_doc(tmp_path)
    doc["material_table"] = "materials.json"
    with pytest.raises(ConfigError, match="material table not found"):
        sim_config_from_dict(doc, base_dir=tmp_path)
