import time

import numpy as np
import pytest

from seatrace.errors import ConfigError
from seatrace.pose import Pose, quat_from_yaw
from seatrace.rng import rayleigh_from_uniform, sensor_stream_seed, keyed_stream
from seatrace.scene import Material, RayHit, cast_ray, scene_from_arrays
from seatrace.sonar import (
    PolarGrid,
    SonarConfig,
    SonarNoiseParams,
    apply_sonar_noise,
    bin_returns,
    compute_return_intensity,
    empty_grid,
    generate_ray_fan,
    normalize_range_wise,
    project_fan_image,
    render_sonar,
    sonar_config_from_dict,
    speckle_compose,
)

import helpers

NOISE_OFF = SonarNoiseParams(enabled=False)


def small_config(**kw):
    base = dict(
        rays_azimuth=130,
        rays_elevation=16,
        bins_range=64,
        bins_azimuth=32,
        noise=NOISE_OFF,
        normalization="none",
    )
    base.update(kw)
    return SonarConfig(**base)


# --- config ---------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        SonarConfig(hfov=200)
    with pytest.raises(ConfigError):
        SonarConfig(vfov=90)
    with pytest.raises(ConfigError):
        SonarConfig(range_min=5, range_max=5)
    with pytest.raises(ConfigError):
        SonarConfig(normalization="global")
    with pytest.raises(ConfigError):
        SonarNoiseParams(sigma_phi=0.0, enabled=True)
    SonarNoiseParams(sigma_phi=0.0, enabled=False)  # fine when disabled


def test_config_dict_round_trip():
    cfg = small_config(attenuation=0.25, seed=7)
    again = sonar_config_from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError, match="bad sonar config"):
        sonar_config_from_dict({"hfov": -1})


# --- ray fan --------------------------------------------------------------


def test_fan_single_ray_is_boresight():
    cfg = small_config(rays_azimuth=1, rays_elevation=1)
    fan = generate_ray_fan(cfg, Pose())
    assert len(fan) == 1
    assert np.allclose(fan.directions[0], [1, 0, 0], atol=1e-12)


def test_fan_endpoints_inclusive():
    cfg = small_config(hfov=130, rays_azimuth=3, rays_elevation=1)
    fan = generate_ray_fan(cfg, Pose())
    assert np.allclose(np.degrees(fan.azimuths), [-65, 0, 65], atol=1e-12)


def test_fan_directions_unit_and_count():
    cfg = small_config(rays_azimuth=9, rays_elevation=5)
    fan = generate_ray_fan(cfg, Pose())
    assert len(fan) == 45
    assert np.abs(np.linalg.norm(fan.directions, axis=1) - 1.0).max() <= 1e-9
    # azimuth-major ordering: first block shares azimuth 0
    assert np.allclose(fan.ray_azimuth[:5], fan.azimuths[0])
    assert np.allclose(fan.ray_elevation[:5], fan.elevations)


def test_fan_rotates_with_pose():
    cfg = small_config(rays_azimuth=1, rays_elevation=1)
    fan = generate_ray_fan(cfg, Pose(orientation=quat_from_yaw(np.pi / 2)))
    assert np.allclose(fan.directions[0], [0, 1, 0], atol=1e-12)


# --- return intensity -----------------------------------------------------


def _hit(incident, normal, distance, reflectance=1.0):
    return RayHit(
        hit=True,
        distance=distance,
        point=np.zeros(3),
        normal=np.asarray(normal, dtype=float),
        geometric_normal=np.asarray(normal, dtype=float),
        incident=np.asarray(incident, dtype=float),
        material=Material(acoustic_reflectance=reflectance),
    )


def test_intensity_head_on():
    assert compute_return_intensity(_hit([1, 0, 0], [-1, 0, 0], 3.0), alpha=0.0) == 1.0


def test_intensity_grazing():
    assert compute_return_intensity(_hit([1, 0, 0], [0, 1, 0], 3.0), alpha=0.0) == 0.0


def test_intensity_60_degrees_attenuated():
    # incidence 60 degrees -> dot factor 0.5, alpha=0.1 over 5 m
    n = [-0.5, np.sqrt(3) / 2, 0]
    value = compute_return_intensity(_hit([1, 0, 0], n, 5.0), alpha=0.1)
    assert value == pytest.approx(0.3032653298563167, abs=1e-6)


def test_intensity_back_face_is_silent():
    assert compute_return_intensity(_hit([1, 0, 0], [1, 0, 0], 3.0), alpha=0.0) == 0.0


def test_intensity_requires_hit():
    with pytest.raises(ValueError):
        compute_return_intensity(RayHit(hit=False), alpha=0.0)


def test_intensity_scales_with_reflectance():
    a = compute_return_intensity(_hit([1, 0, 0], [-1, 0, 0], 2.0, reflectance=0.9), 0.0)
    assert a == pytest.approx(0.9, abs=1e-12)


# --- binning --------------------------------------------------------------


def test_bin_single_return_lands_in_bin_58():
    cfg = small_config(bins_range=350, bins_azimuth=220, range_max=30.0)
    grid = bin_returns([(5.0, 0.0, 1.0)], cfg)
    i, j = np.argwhere(grid.intensities > 0)[0]
    assert i == 58
    assert grid.intensities.sum() == pytest.approx(1.0)


def test_bin_sums_in_same_bin():
    cfg = small_config()
    grid = bin_returns([(5.0, 0.0, 0.3), (5.0, 0.0, 0.2)], cfg)
    assert grid.intensities.max() == pytest.approx(0.5, abs=1e-12)


def test_bin_drops_out_of_range():
    cfg = small_config(range_max=30.0)
    grid = bin_returns(
        [(31.0, 0.0, 1.0), (0.05, 0.0, 1.0), (5.0, np.radians(80.0), 1.0)], cfg
    )
    assert grid.intensities.sum() == 0.0


def test_bin_edge_goes_to_higher_bin():
    # step 0.1 m exactly representable: 8.0 m sits on the edge of bins 79|80
    cfg = small_config(range_max=32.0, bins_range=320)
    grid = bin_returns([(8.0, 0.0, 1.0)], cfg)
    assert grid.intensities[80].sum() == 1.0
    # boresight sits on the centerline edge with an even azimuth bin count
    cfg2 = small_config(bins_azimuth=10)
    grid2 = bin_returns([(5.0, 0.0, 1.0)], cfg2)
    assert grid2.intensities[:, 5].sum() == 1.0


def test_bin_far_edge_closed():
    cfg = small_config(range_max=30.0)
    grid = bin_returns([(30.0, 0.0, 1.0)], cfg)
    assert grid.intensities[-1].sum() == 1.0


def test_bin_conservation():
    cfg = small_config()
    rng = np.random.default_rng(5)
    n = 5000
    r = rng.uniform(0, 35, n)
    az = rng.uniform(-1.5, 1.5, n)
    inten = rng.uniform(0, 2, n)
    half = np.radians(cfg.hfov) / 2
    kept = (r >= cfg.range_min) & (r <= cfg.range_max) & (np.abs(az) <= half)
    grid = bin_returns(np.stack([r, az, inten], axis=1), cfg)
    assert grid.intensities.sum() == pytest.approx(inten[kept].sum(), rel=1e-4)


# --- noise ----------------------------------------------------------------


def test_noise_disabled_is_bypass():
    cfg = small_config()
    grid = bin_returns([(5.0, 0.0, 1.0)], cfg)
    out = apply_sonar_noise(grid, NOISE_OFF, rng_seed=1)
    assert out is grid


def test_noise_injected_sample_case():
    # r = r_max/2, boresight, clean intensity 2.0, w_additive=1, w_mult=0
    noise = SonarNoiseParams(sigma_phi=0.1, sigma_additive=0.15, sigma_mult=0.2)
    out = speckle_compose(
        intensities=np.array([[2.0]]),
        range_centers=np.array([15.0]),
        azimuth_centers=np.array([0.0]),
        range_max=30.0,
        noise=noise,
        w_additive=np.array([[1.0]]),
        w_mult=np.array([[0.0]]),
    )
    assert out[0, 0] == 1.375


def test_noise_negative_clamped():
    noise = SonarNoiseParams()
    out = speckle_compose(
        np.array([[1.0]]),
        np.array([0.0]),
        np.array([0.0]),
        30.0,
        noise,
        w_additive=np.array([[0.0]]),
        w_mult=np.array([[-5.0]]),
    )
    assert out[0, 0] == 0.0


def test_noise_deterministic_per_seed_and_frame():
    cfg = small_config(noise=SonarNoiseParams())
    grid = bin_returns([(5.0, 0.0, 1.0)], cfg)
    a = apply_sonar_noise(grid, cfg.noise, rng_seed=42, frame=3)
    b = apply_sonar_noise(grid, cfg.noise, rng_seed=42, frame=3)
    c = apply_sonar_noise(grid, cfg.noise, rng_seed=42, frame=4)
    d = apply_sonar_noise(grid, cfg.noise, rng_seed=43, frame=3)
    assert np.array_equal(a.intensities, b.intensities)
    assert not np.array_equal(a.intensities, c.intensities)
    assert not np.array_equal(a.intensities, d.intensities)


def test_rayleigh_sampler_moment():
    sigma = 0.15
    u = keyed_stream(9, 0).random(200_000)
    draws = rayleigh_from_uniform(u, sigma)
    assert draws.mean() == pytest.approx(sigma * np.sqrt(np.pi / 2), rel=0.01)


def test_additive_noise_range_law():
    # zero signal, boresight-only column: E[noisy] = (r^2/r_max^2)(1 + gain*E[w])
    noise = SonarNoiseParams(sigma_phi=0.1, sigma_additive=0.15, sigma_mult=0.0)
    cfg = SonarConfig(
        rays_azimuth=1, rays_elevation=1, bins_range=64, bins_azimuth=1,
        noise=noise, normalization="none",
    )
    base = empty_grid(cfg)
    frames = 400
    acc = np.zeros(cfg.bins_range)
    for f in range(frames):
        acc += apply_sonar_noise(base, noise, rng_seed=11, frame=f).intensities[:, 0]
    mean = acc / frames
    r2 = base.range_centers**2
    slope = (mean @ r2) / (r2 @ r2)
    expected = (1.0 + 0.5 * noise.sigma_additive * np.sqrt(np.pi / 2)) / cfg.range_max**2
    assert slope == pytest.approx(expected, rel=0.05)


# --- normalization --------------------------------------------------------


def test_normalize_rows():
    grid = PolarGrid(
        np.array([[2.0, 4.0, 8.0], [0.0, 0.0, 0.0]]),
        np.array([1.0, 2.0]),
        np.array([-0.1, 0.0, 0.1]),
        30.0,
    )
    out = normalize_range_wise(grid)
    assert np.allclose(out.intensities[0], [0.25, 0.5, 1.0])
    assert (out.intensities[1] == 0).all()
    again = normalize_range_wise(out)
    assert np.array_equal(again.intensities, out.intensities)


# --- render_sonar ---------------------------------------------------------


def test_render_empty_scene_noise_off_zero_grid():
    cfg = small_config()
    grid = render_sonar(None, Pose(), cfg)
    assert (grid.intensities == 0).all()


def test_render_matches_manual_composition():
    scene = helpers.plate_scene(5.0, 4.0, 2.0)
    # single chunk (<= 64 azimuth columns) keeps accumulation order identical
    cfg = small_config(rays_azimuth=48, rays_elevation=12, hfov=24, vfov=10)
    grid = render_sonar(scene, Pose(), cfg)

    fan = generate_ray_fan(cfg, Pose())
    rets = []
    for az, el, d in fan:
        hit = cast_ray(scene, Pose().position, d, max_range=cfg.range_max)
        if hit.hit and hit.distance >= cfg.range_min:
            rets.append((hit.distance, az, compute_return_intensity(hit, cfg.attenuation)))
    manual = bin_returns(rets, cfg)
    assert np.abs(grid.intensities - manual.intensities).max() <= 1e-12


def test_render_worker_count_bit_exact():
    scene = helpers.plate_scene(5.0, 8.0, 4.0)
    cfg = small_config(noise=SonarNoiseParams(), seed=3)  # 130 cols -> 3 chunks
    a = render_sonar(scene, Pose(), cfg, workers=1)
    b = render_sonar(scene, Pose(), cfg, workers=3)
    c = render_sonar(scene, Pose(), cfg, workers=8)
    assert np.array_equal(a.intensities, b.intensities)
    assert np.array_equal(a.intensities, c.intensities)


def test_render_same_seed_bit_exact():
    scene = helpers.plate_scene(5.0, 8.0, 4.0)
    cfg = small_config(noise=SonarNoiseParams(), seed=3)
    a = render_sonar(scene, Pose(), cfg, frame=2)
    b = render_sonar(scene, Pose(), cfg, frame=2)
    assert np.array_equal(a.intensities, b.intensities)


def test_render_range_min_drops_close_returns():
    # narrow fan so even the widest ray meets the plate inside range_min
    scene = helpers.plate_scene(0.5, 8.0, 4.0)
    cfg = small_config(range_min=1.0, hfov=24, vfov=10)
    grid = render_sonar(scene, Pose(), cfg)
    assert grid.intensities.sum() == 0.0


def test_render_normalized_rows_le_one():
    scene = helpers.plate_scene(5.0, 8.0, 4.0)
    cfg = small_config(normalization="range_wise")
    grid = render_sonar(scene, Pose(), cfg)
    assert grid.intensities.max() <= 1.0
    row_max = grid.intensities.max(axis=1)
    lit = row_max > 0
    assert np.allclose(row_max[lit], 1.0)


def test_render_first_frame_close_to_steady_state():
    # fresh scene: only the BVH build precedes the first frame; no other cache
    verts, tris = helpers.heightfield_mesh(100, extent=20.0, amplitude=0.3, z0=-8.0, seed=4)
    scene = scene_from_arrays(verts, tris)
    cfg = small_config(rays_azimuth=256, rays_elevation=32, range_max=40.0)
    pose = Pose()
    t0 = time.perf_counter()
    render_sonar(scene, pose, cfg)
    t_first = time.perf_counter() - t0
    laps = []
    for _ in range(3):
        t0 = time.perf_counter()
        render_sonar(scene, pose, cfg)
        laps.append(time.perf_counter() - t0)
    steady = min(laps)
    assert t_first <= 2.0 * steady + 0.010, (t_first, laps)


# --- fan projection -------------------------------------------------------


def test_fan_image_zero_grid():
    cfg = small_config()
    img = project_fan_image(empty_grid(cfg), cfg, 64, 48)
    assert img.shape == (48, 64)
    assert (img == 0).all()


def test_fan_image_uniform_grid():
    cfg = small_config()
    grid = empty_grid(cfg).replace(np.ones((cfg.bins_range, cfg.bins_azimuth)))
    img = project_fan_image(grid, cfg, 101, 80)
    assert set(np.unique(img)) <= {0.0, 1.0}
    assert img.max() == 1.0 and img.min() == 0.0
    # apex at bottom center is inside the wedge, far corners are not
    assert img[0, 0] == 0.0 and img[0, -1] == 0.0


def test_fan_image_boresight_bin_lands_on_centerline():
    cfg = small_config(bins_range=100, bins_azimuth=11, range_max=30.0)
    inten = np.zeros((100, 11))
    inten[50, 5] = 1.0  # boresight column, mid range
    grid = empty_grid(cfg).replace(inten)
    img = project_fan_image(grid, cfg, 101, 101)
    assert img[50, 50] == 1.0  # v = 100-50 = 50 -> r = 15 m -> bin 50
    assert img[10, 50] == 0.0
    assert img[90, 50] == 0.0
    assert img[50, 10] == 0.0
