"""Polar lattice of candidate view-landing-points and their information gain."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import EmptyGrid
from .infomap import NoiseModel


@dataclass(frozen=True)
class SamplerParams:
    P_min: float = 2.0
    delta_d: float = 0.4
    delta_theta: float = math.radians(20.0)
    N_AP: int = 10
    N_SP: int = 18
    d_n: float = 1.2

    def __post_init__(self):
        if not (self.P_min > 0 and self.delta_d > 0 and self.d_n > 0):
            raise ValueError("P_min, delta_d and d_n must be positive")
        if not (0 < self.delta_theta <= math.pi + 1e-12):
            raise ValueError("delta_theta must lie in (0, pi]")
        if self.N_SP % 2 or self.N_SP < 2:
            raise ValueError("N_SP must be a positive even count")
        if self.N_AP < 0:
            raise ValueError("N_AP must be non-negative")

    @property
    def theta_max(self):
        return (self.N_SP // 2) * self.delta_theta

    @property
    def radii(self):
        return self.P_min + self.delta_d * np.arange(self.N_AP + 1)

    @property
    def thetas(self):
        return self.delta_theta * np.arange(-(self.N_SP // 2), self.N_SP // 2 + 1)


@dataclass(frozen=True)
class SamplePoint:
    circle_index: int
    angle_index: int
    theta: float
    radius: float
    world_position: np.ndarray
    gain: float = math.nan


def polar_to_world(center, base_yaw, radius, theta):
    """Planar point at ``radius`` and angle ``theta`` (from the base forward axis)."""
    psi = theta + base_yaw
    c = np.asarray(center, dtype=float)
    return c + np.array([radius * math.sin(psi), radius * math.cos(psi), 0.0])


@dataclass
class SampleGrid:
    """``positions[i, j]`` is sample ``j`` on circle ``i``; ``gains`` share that shape."""

    robot_position: np.ndarray
    base_yaw: float
    params: SamplerParams
    radii: np.ndarray
    thetas: np.ndarray
    positions: np.ndarray
    gains: np.ndarray = field(default=None)
    info_sums: np.ndarray = field(default=None)

    @property
    def anchors(self):
        return self.positions[:, len(self.thetas) // 2]

    def sample(self, i, j):
        gain = math.nan if self.gains is None else float(self.gains[i, j])
        return SamplePoint(i, j, float(self.thetas[j]), float(self.radii[i]), self.positions[i, j].copy(), gain)

    def circles(self):
        """Per-circle ``(radius, anchor, samples)`` triples, samples ordered by theta."""
        return [
            (float(self.radii[i]), self.anchors[i].copy(), [self.sample(i, j) for j in range(len(self.thetas))])
            for i in range(len(self.radii))
        ]


def generate_samples(robot_position, base_yaw, params=SamplerParams()):
    radii = params.radii
    thetas = params.thetas
    psi = thetas + base_yaw
    offsets = np.zeros((len(radii), len(thetas), 3))
    offsets[..., 0] = radii[:, None] * np.sin(psi)[None, :]
    offsets[..., 1] = radii[:, None] * np.cos(psi)[None, :]
    pos = np.asarray(robot_position, dtype=float).reshape(1, 1, 3) + offsets
    return SampleGrid(np.asarray(robot_position, dtype=float).copy(), float(base_yaw), params, radii, thetas, pos)


def penalized_gain(info_sum, theta):
    """Information sum minus the motion-consistency penalty ``(S/pi)|theta|``."""
    return info_sum * (1.0 - np.abs(theta) / math.pi)


def sample_gain(snapshot, camera_position, sample, params=SamplerParams(), noise=NoiseModel()):
    s = snapshot.neighbor_sums(camera_position, sample.world_position[None, :], params.d_n, noise)[0]
    return float(penalized_gain(s, sample.theta))


def evaluate_gains(grid, snapshot, camera_position, noise=NoiseModel()):
    """Fill ``grid.gains`` (and the raw neighbour sums) for every sample at once."""
    flat = grid.positions.reshape(-1, 3)
    sums = snapshot.neighbor_sums(camera_position, flat, grid.params.d_n, noise).reshape(grid.positions.shape[:2])
    grid.info_sums = sums
    grid.gains = penalized_gain(sums, grid.thetas[None, :])
    return grid


def _best_index(gains, thetas):
    # max gain, then smaller |theta|, then negative theta first
    order = sorted(range(len(thetas)), key=lambda j: (-gains[j], abs(thetas[j]), thetas[j]))
    return order[0]


def best_sample(grid):
    """Best sample of every circle."""
    if grid.gains is None or grid.gains.size == 0:
        raise EmptyGrid("grid has no evaluated samples")
    return [grid.sample(i, _best_index(grid.gains[i].tolist(), grid.thetas.tolist())) for i in range(len(grid.radii))]


def best_overall(grid):
    """Best sample over the whole grid (ties: smaller radius, then the per-circle rule)."""
    per_circle = best_sample(grid)
    return min(per_circle, key=lambda s: (-s.gain, s.radius, abs(s.theta), s.theta))


def dense_thetas(theta_max, step=0.01):
    n = int(math.floor(theta_max / step + 1e-9))
    return step * np.arange(-n, n + 1)


def dense_circle_gains(snapshot, camera_position, robot_position, base_yaw, radius, params=SamplerParams(),
                       noise=NoiseModel(), step=0.01):
    """Penalised gain sampled densely along one circle; returns ``(thetas, gains)``."""
    th = dense_thetas(params.theta_max, step)
    psi = th + base_yaw
    pts = np.asarray(robot_position, dtype=float) + np.column_stack(
        [radius * np.sin(psi), radius * np.cos(psi), np.zeros(len(th))]
    )
    sums = snapshot.neighbor_sums(camera_position, pts, params.d_n, noise)
    return th, penalized_gain(sums, th)
