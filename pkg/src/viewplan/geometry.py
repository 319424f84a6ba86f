"""
Pose arithmetic, the bearing observation model and two-axis gimbal kinematics.

Angle convention used everywhere in the package: headings and gimbal yaw are
measured from the base forward axis (+y) toward +x, so a heading ``psi`` points
along ``(sin psi, cos psi, 0)``.  Pitch is positive when looking down.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import DegenerateVertical, ZeroRange

MIN_RANGE = 1e-9


def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w == -math.pi:
        w = math.pi
    return w


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def heading_vector(psi):
    return np.array([math.sin(psi), math.cos(psi), 0.0])


def heading_of(vec):
    """Heading angle of the horizontal part of ``vec`` (0 along +y, +pi/2 along +x)."""
    return math.atan2(vec[0], vec[1])


def base_rotation(base_yaw):
    """Base-to-world rotation: body +y maps to the heading ``base_yaw``."""
    return rot_z(-base_yaw)


def camera_rotation(heading, pitch):
    """Camera-to-world rotation for an optical axis at ``heading`` tilted down by ``pitch``.

    Camera frame: z along the optical axis, x to the right, y completing the
    right-handed frame (pointing downward in the image).
    """
    cp, sp = math.cos(pitch), math.sin(pitch)
    z_c = np.array([math.sin(heading) * cp, math.cos(heading) * cp, -sp])
    x_c = np.array([math.cos(heading), -math.sin(heading), 0.0])
    y_c = np.cross(z_c, x_c)
    return np.column_stack([x_c, y_c, z_c])


@dataclass(frozen=True)
class Pose:
    """Rigid pose; ``rotation`` maps body-frame vectors into the world frame."""

    position: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))

    @classmethod
    def from_yaw(cls, position, base_yaw):
        return cls(position, base_rotation(base_yaw))

    @property
    def base_yaw(self):
        """Heading of the body +y axis."""
        return heading_of(self.rotation[:, 1])

    def is_proper(self, tol=1e-9):
        r = self.rotation
        return np.allclose(r.T @ r, np.eye(3), atol=tol) and abs(np.linalg.det(r) - 1.0) <= tol

    def to_body(self, point):
        return self.rotation.T @ (np.asarray(point, dtype=float) - self.position)


@dataclass(frozen=True)
class GimbalCommand:
    yaw_target: float
    pitch_target: float
    # set when the landing point is vertically aligned and the previous yaw was kept
    yaw_held: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.yaw_target) and math.isfinite(self.pitch_target)):
            raise ValueError("gimbal command must be finite")
        object.__setattr__(self, "yaw_target", wrap_angle(float(self.yaw_target)))
        object.__setattr__(self, "pitch_target", wrap_angle(float(self.pitch_target)))


@dataclass(frozen=True)
class GimbalState:
    yaw: float = 0.0
    pitch: float = 0.0
    yaw_limits: tuple = (-math.pi, math.pi)
    pitch_limits: tuple = (-0.5, 1.4)
    max_rate: float = 2.0
    tick: float = 0.01

    def __post_init__(self):
        if self.max_rate <= 0 or self.tick <= 0:
            raise ValueError("max_rate and tick must be positive")
        lo, hi = self.yaw_limits
        if not (lo - 1e-12 <= self.yaw <= hi + 1e-12):
            raise ValueError(f"yaw {self.yaw} outside limits {self.yaw_limits}")
        lo, hi = self.pitch_limits
        if not (lo - 1e-12 <= self.pitch <= hi + 1e-12):
            raise ValueError(f"pitch {self.pitch} outside limits {self.pitch_limits}")


def bearing(camera_pose, point):
    """Unit bearing of ``point`` in the camera frame."""
    pc = camera_pose.to_body(point)
    r = float(np.linalg.norm(pc))
    if r <= MIN_RANGE:
        raise ZeroRange(f"point {np.asarray(point)} coincides with the camera")
    return pc / r


def bearing_jacobian(camera_pose, point):
    """3x6 Jacobian of :func:`bearing` w.r.t. a body-frame pose perturbation.

    The perturbation ``xi = [dt, dphi]`` acts as ``t <- t + R dt`` and
    ``R <- R exp([dphi]x)``, which gives ``d pc = -dt + [pc]x dphi``.
    """
    pc = camera_pose.to_body(point)
    r = float(np.linalg.norm(pc))
    if r <= MIN_RANGE:
        raise ZeroRange(f"point {np.asarray(point)} coincides with the camera")
    u = pc / r
    proj = (np.eye(3) - np.outer(u, u)) / r
    return np.hstack([-proj, proj @ skew(pc)])


def gimbal_ik(camera_position, base_yaw, landing_point, hold_yaw=None):
    """Yaw/pitch that put the optical axis through ``landing_point``.

    Raises :class:`DegenerateVertical` when the point is straight below or above
    the camera, unless ``hold_yaw`` is given, in which case that yaw is kept and
    the returned command carries ``yaw_held=True``.
    """
    d = np.asarray(landing_point, dtype=float) - np.asarray(camera_position, dtype=float)
    if np.linalg.norm(d) <= MIN_RANGE:
        raise ZeroRange("landing point coincides with the camera")
    horiz = math.hypot(d[0], d[1])
    pitch = math.atan2(-d[2], horiz)
    if horiz < MIN_RANGE:
        if hold_yaw is None:
            raise DegenerateVertical("landing point is vertically aligned with the camera")
        return GimbalCommand(hold_yaw, pitch, yaw_held=True)
    yaw = wrap_angle(math.atan2(d[0], d[1]) - base_yaw)
    return GimbalCommand(yaw, pitch)


def optical_axis(base_yaw, yaw, pitch):
    """World-frame unit optical axis for the given base heading and gimbal angles."""
    psi = base_yaw + yaw
    cp = math.cos(pitch)
    return np.array([math.sin(psi) * cp, math.cos(psi) * cp, -math.sin(pitch)])


def ground_intersection(camera_position, base_yaw, yaw, pitch, ground_z=0.0):
    """Point where the optical axis meets the plane ``z = ground_z`` (None if it never does)."""
    axis = optical_axis(base_yaw, yaw, pitch)
    c = np.asarray(camera_position, dtype=float)
    if abs(axis[2]) < 1e-12:
        return None
    s = (ground_z - c[2]) / axis[2]
    if s <= 0:
        return None
    return c + s * axis


def _is_full_circle(limits):
    return limits[1] - limits[0] >= 2.0 * math.pi - 1e-12


def _axis_step(current, target, limits, max_step):
    lo, hi = limits
    if _is_full_circle(limits):
        diff = wrap_angle(target - current)
        nxt = current + max(-max_step, min(max_step, diff))
        return wrap_angle(nxt) if abs(diff) > max_step else wrap_angle(target)
    # bounded joint: cannot pass through the gap, so move along the direct arc
    goal = min(hi, max(lo, wrap_angle(target)))
    diff = goal - current
    if abs(diff) <= max_step:
        return goal
    return min(hi, max(lo, current + math.copysign(max_step, diff)))


def gimbal_track_step(state, command):
    """Advance both gimbal axes one tick toward ``command`` under the rate limit."""
    max_step = state.max_rate * state.tick
    yaw = _axis_step(state.yaw, command.yaw_target, state.yaw_limits, max_step)
    pitch = _axis_step(state.pitch, command.pitch_target, state.pitch_limits, max_step)
    return replace(state, yaw=yaw, pitch=pitch)
