"""seatrace: an underwater perception simulator.

Physics-based sensor models over triangle-mesh scenes: underwater camera
image formation, ray-traced multibeam imaging sonar with speckle noise,
DVL, and barometer, plus a dataset recording pipeline, benchmark harness,
and an interactive water-parameter tuning service.
"""

from .errors import ConfigError, SceneLoadError, SimError
from .pose import Pose, quat_from_yaw, quat_slerp, quat_to_matrix
from .scene import (Material, RayHit, Scene, TriangleMesh,
                    assign_semantic_materials, cast_ray, load_material_table,
                    load_scene, scene_from_arrays)
from .camera import (CameraIntrinsics, ImagePair, LightConfig,
                     WaterColumnParams, WATER_PRESETS, apply_water_effects,
                     load_water_params, render_in_air, save_water_params,
                     water_model, water_preset)
from .sonar import (PolarGrid, RayFan, SonarConfig, SonarNoiseParams,
                    apply_sonar_noise, bin_returns, compute_return_intensity,
                    empty_grid, generate_ray_fan, normalize_range_wise,
                    project_fan_image, render_sonar, speckle_compose)
from .navsensors import (BarometerConfig, DvlConfig, DvlMeasurement,
                         dvl_beam_directions, rate_for_range, sample_barometer,
                         sample_dvl)
from .metrics import (BenchReport, PatchSpec, bench_sonar, load_patches,
                      patch_error_report, rgb_angular_error, save_patches)
from .pipeline import (SimConfig, Trajectory, interpolate_pose,
                       load_scene_for_config, load_sim_config, load_trajectory,
                       run_simulation, save_trajectory, verify_manifest)
from .rng import keyed_stream, rayleigh_from_uniform, sensor_stream_seed

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
