import numpy as np
import pytest

from seatrace.pose import Pose
from seatrace.sonar import SonarConfig, SonarNoiseParams, render_sonar

import helpers


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile (or load from disk cache) the jitted kernels once per session
    so individual timed tests measure steady-state work only."""
    scene = helpers.plate_scene(2.0, 5.0, 5.0)
    cfg = SonarConfig(
        rays_azimuth=8,
        rays_elevation=4,
        bins_range=16,
        bins_azimuth=8,
        noise=SonarNoiseParams(enabled=False),
        normalization="none",
    )
    render_sonar(scene, Pose(), cfg, workers=1)
    render_sonar(scene, Pose(), cfg, workers=2)


@pytest.fixture()
def identity_pose():
    return Pose()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
