"""Camera frustum gating and the Cramér-Rao localisation proxy."""

from dataclasses import dataclass
import math

import numpy as np

from ..geometry import Pose, camera_rotation
from ..infomap import NoiseModel

MIN_EIG = 1e-9


@dataclass(frozen=True)
class SensorParams:
    fov_h: float = math.radians(69.0)
    fov_v: float = math.radians(42.0)
    max_range: float = 10.0
    camera_height: float = 0.5
    min_track_features: int = 8

    @classmethod
    def from_settings(cls, s):
        return cls(
            math.radians(s.fov_h_deg), math.radians(s.fov_v_deg), s.max_range, s.camera_height,
            s.min_track_features,
        )


def camera_pose(pose, gimbal_yaw, gimbal_pitch, camera_height=0.5, body_pitch=0.0):
    """World pose of the camera on a base ``pose`` (``body_pitch`` is nose-up)."""
    position = pose.position + np.array([0.0, 0.0, camera_height])
    return Pose(position, camera_rotation(pose.base_yaw + gimbal_yaw, gimbal_pitch - body_pitch))


def in_frustum(cam, points, sensor):
    """Boolean mask of points within range, in front and inside both half-FOVs."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    pc = (pts - cam.position) @ cam.rotation
    z = pc[:, 2]
    rng = np.linalg.norm(pc, axis=1)
    front = z > 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        h_ok = np.abs(np.arctan2(pc[:, 0], z)) <= sensor.fov_h / 2
        v_ok = np.abs(np.arctan2(pc[:, 1], z)) <= sensor.fov_v / 2
    return front & (rng <= sensor.max_range) & h_ok & v_ok


def visible_features(pose, gimbal, field, sensor=SensorParams(), body_pitch=0.0):
    cam = camera_pose(pose, gimbal.yaw, gimbal.pitch, sensor.camera_height, body_pitch)
    field = np.asarray(field, dtype=float).reshape(-1, 3)
    return field[in_frustum(cam, field, sensor)]


def pose_fim(points, cam, noise=NoiseModel()):
    """Summed 6x6 bearing FIM of ``points`` at the actual camera orientation."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    pc = (pts - cam.position) @ cam.rotation
    r = np.linalg.norm(pc, axis=1)
    u = pc / r[:, None]
    proj = (np.eye(3)[None] - u[:, :, None] * u[:, None, :]) / r[:, None, None]
    sk = np.zeros((len(pc), 3, 3))
    sk[:, 0, 1], sk[:, 0, 2] = -pc[:, 2], pc[:, 1]
    sk[:, 1, 0], sk[:, 1, 2] = pc[:, 2], -pc[:, 0]
    sk[:, 2, 0], sk[:, 2, 1] = -pc[:, 1], pc[:, 0]
    jac = np.concatenate([-proj, proj @ sk], axis=2)
    w = noise.precision_diag(r)
    return np.einsum("nki,nk,nkj->ij", jac, w, jac)


def localization_crlb(visible, cam, noise=NoiseModel(), min_track_features=8):
    """Trace of the inverse summed FIM and whether tracking is considered alive.

    Returns ``(inf, False)`` when too few features are visible or the FIM is
    numerically singular.
    """
    visible = np.asarray(visible, dtype=float).reshape(-1, 3)
    if len(visible) < max(min_track_features, 1):
        return math.inf, False
    fim = pose_fim(visible, cam, noise)
    fim = 0.5 * (fim + fim.T)
    if np.linalg.eigvalsh(fim)[0] <= MIN_EIG:
        return math.inf, False
    return float(np.trace(np.linalg.inv(fim))), True
