"""Rigid-body pose (position + unit quaternion) and quaternion helpers.

Quaternions are stored as [w, x, y, z]. World frame is z-up; each sensor
defines its own sensor frame (see camera / sonar / DVL modules).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    return q / n


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix for unit quaternion [w, x, y, z] (world_from_sensor)."""
    w, x, y, z = (float(v) for v in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def quat_from_yaw(yaw_rad: float) -> np.ndarray:
    """Rotation about world +z by yaw_rad."""
    h = 0.5 * yaw_rad
    return np.array([np.cos(h), 0.0, 0.0, np.sin(h)], dtype=np.float64)


def quat_slerp(q0, q1, u: float) -> np.ndarray:
    """Spherical interpolation along the shorter arc; u in [0, 1]."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    d = float(np.dot(q0, q1))
    if d < 0.0:
        q1 = -q1
        d = -d
    if d > 1.0 - 1e-12:
        # nearly parallel: linear blend avoids 0/0
        return quat_normalize(q0 + u * (q1 - q0))
    theta = np.arccos(min(d, 1.0))
    s = np.sin(theta)
    return (np.sin((1.0 - u) * theta) / s) * q0 + (np.sin(u * theta) / s) * q1


@dataclass(frozen=True)
class Pose:
    """6-DoF pose: position in meters, orientation as unit quaternion [w,x,y,z]."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(pos)):
            raise ValueError("pose position must be finite")
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > QUAT_NORM_TOL:
            raise ValueError(f"quaternion norm {n!r} deviates from 1 by more than {QUAT_NORM_TOL}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)

    def rotation(self) -> np.ndarray:
        """3x3 world_from_sensor rotation matrix."""
        return quat_to_matrix(self.orientation)

    def transform_direction(self, d_sensor) -> np.ndarray:
        return self.rotation() @ np.asarray(d_sensor, dtype=np.float64)

    def transform_point(self, p_sensor) -> np.ndarray:
        return self.rotation() @ np.asarray(p_sensor, dtype=np.float64) + self.position
