"""Scenario documents, synthetic feature fields and trajectories."""

import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator, PrivateAttr
from shapely.geometry import LineString

from ..errors import ScenarioError
from ..geometry import Pose, heading_of
from ..infomap import DEFAULT_VOXEL_SIZE, NoiseModel
from ..io import read_cloud
from ..planner import HorizonParams, PlannerConfig
from ..sampling import SamplerParams

PLANNERS = ("pas", "usv", "mst", "rsdt", "iglov")
MAX_SPEED = 20.0 / 3.6


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Region(_Strict):
    """Axis-aligned rectangle (``min``/``max`` corners) or disk (``center``/``radius``)."""

    shape: Literal["rectangle", "disk"]
    min: Optional[Tuple[float, float]] = None
    max: Optional[Tuple[float, float]] = None
    center: Optional[Tuple[float, float]] = None
    radius: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.shape == "rectangle":
            if self.min is None or self.max is None:
                raise ValueError("rectangle needs min and max")
            if not (self.max[0] > self.min[0] and self.max[1] > self.min[1]):
                raise ValueError("rectangle max must exceed min")
        else:
            if self.center is None or self.radius is None or not self.radius > 0:
                raise ValueError("disk needs center and a positive radius")
        return self

    @property
    def area(self):
        if self.shape == "rectangle":
            return (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
        return math.pi * self.radius ** 2

    def sample(self, rng, n):
        if self.shape == "rectangle":
            xy = rng.uniform(self.min, self.max, size=(n, 2))
        else:
            r = self.radius * np.sqrt(rng.uniform(0.0, 1.0, n))
            a = rng.uniform(-math.pi, math.pi, n)
            xy = np.column_stack([self.center[0] + r * np.cos(a), self.center[1] + r * np.sin(a)])
        return xy

    def contains(self, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if self.shape == "rectangle":
            return (
                (xy[:, 0] >= self.min[0]) & (xy[:, 0] <= self.max[0]) & (xy[:, 1] >= self.min[1]) & (xy[:, 1] <= self.max[1])
            )
        d = xy - np.asarray(self.center)
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2


class Patch(Region):
    density: float = Field(ge=0.0)
    z_jitter: float = Field(default=0.3, ge=0.0)


class TrajectorySpec(_Strict):
    waypoints: List[Tuple[float, float]] = Field(min_length=2)
    speed: float = Field(default=1.0, gt=0.0, le=MAX_SPEED)
    offset: float = 0.0


class SamplerSpec(_Strict):
    P_min: float = 2.0
    delta_d: float = 0.4
    delta_theta_deg: float = 20.0
    N_AP: int = 10
    N_SP: int = 18
    d_n: float = 1.2


class HorizonSpec(_Strict):
    L: int = 6
    lambda_info: float = 1.0
    lambda_smo: float = 0.12
    step_size: float = 0.1
    max_iters: int = 50
    tol: float = 1e-4
    degree: int = 6
    normalize: bool = True


class NoiseSpec(_Strict):
    mode: Literal["isotropic", "depth_dependent"] = "isotropic"
    sigma2: float = 1.0
    pixel_var: float = 0.25
    depth_coeff: float = 1.425e-3


class SensorSpec(_Strict):
    fov_h_deg: float = 69.0
    fov_v_deg: float = 42.0
    max_range: float = 10.0
    camera_height: float = 0.5
    min_track_features: int = 8
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)


class GimbalSpec(_Strict):
    yaw_limits: Tuple[float, float] = (-math.pi, math.pi)
    pitch_limits: Tuple[float, float] = (-0.5, 1.4)
    max_rate: float = Field(default=2.0, gt=0.0)
    tick: float = Field(default=0.01, gt=0.0)
    # fixed pitch of the passive camera and of the uniform-view candidates
    default_pitch: float = 0.124


class TerrainSpec(_Strict):
    """Nose-up body pitch disturbance ``amplitude * sin(2 pi t / period)``."""

    amplitude: float = 0.0
    period: float = Field(default=4.0, gt=0.0)


class Scenario(_Strict):
    name: str
    feature_patches: List[Patch] = Field(default_factory=list)
    exclusions: List[Region] = Field(default_factory=list)
    point_cloud_file: Optional[str] = None
    trajectory: TrajectorySpec
    planner: Literal["pas", "usv", "mst", "rsdt", "iglov"] = "iglov"
    sampler: SamplerSpec = SamplerSpec()
    horizon: HorizonSpec = HorizonSpec()
    noise: NoiseSpec = NoiseSpec()
    sensor: SensorSpec = SensorSpec()
    gimbal: GimbalSpec = GimbalSpec()
    terrain: TerrainSpec = TerrainSpec()
    seed: int = 0
    steps: Optional[int] = Field(default=None, ge=0)
    dt: float = Field(default=0.5, gt=0.0)
    voxel_size: float = Field(default=DEFAULT_VOXEL_SIZE, gt=0.0)
    mst_samples: int = 500
    mst_radius: float = 5.0
    usv_views: int = 10
    # directory used to resolve a relative point_cloud_file
    _base_dir: Optional[str] = PrivateAttr(default=None)

    def sampler_params(self):
        s = self.sampler
        return SamplerParams(s.P_min, s.delta_d, math.radians(s.delta_theta_deg), s.N_AP, s.N_SP, s.d_n)

    def horizon_params(self):
        return HorizonParams(**self.horizon.model_dump())

    def noise_model(self):
        return NoiseModel(**self.noise.model_dump())

    def planner_config(self):
        return PlannerConfig(
            self.sampler_params(), self.horizon_params(), self.noise_model(), self.sensor.camera_height, self.dt
        )

    def build_trajectory(self):
        return Trajectory(self.trajectory.waypoints, self.trajectory.speed, self.trajectory.offset)

    def n_steps(self):
        if self.steps is not None:
            return self.steps
        traj = self.build_trajectory()
        return int(math.floor(traj.length / (traj.speed * self.dt))) + 1


def load_scenario(path, **overrides):
    """Parse and validate a scenario JSON file; any problem raises :class:`ScenarioError`."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return parse_scenario(doc, base_dir=str(path.parent), **overrides)


def parse_scenario(doc, base_dir=None, **overrides):
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        sc = Scenario.model_validate(doc)
    except ValidationError as exc:
        raise ScenarioError(str(exc)) from exc
    sc._base_dir = base_dir
    return sc


def generate_field(scenario):
    """Seeded feature points of every patch, minus excluded regions, plus the optional cloud."""
    chunks = []
    for i, patch in enumerate(scenario.feature_patches):
        n = int(round(patch.area * patch.density))
        rng = np.random.default_rng([scenario.seed, i])
        xy = patch.sample(rng, n)
        z = rng.uniform(0.0, patch.z_jitter, n) if patch.z_jitter > 0 else np.zeros(n)
        chunks.append(np.column_stack([xy, z]))
    pts = np.vstack(chunks) if chunks else np.zeros((0, 3))
    for region in scenario.exclusions:
        pts = pts[~region.contains(pts[:, :2])]
    if scenario.point_cloud_file:
        p = Path(scenario.point_cloud_file)
        if not p.is_absolute() and scenario._base_dir:
            p = Path(scenario._base_dir) / p
        try:
            cloud = read_cloud(p)
        except (OSError, ValueError) as exc:
            raise ScenarioError(f"point cloud {p}: {exc}") from exc
        pts = np.vstack([pts, cloud])
    return pts


class Trajectory:
    """Constant-speed motion along a planar polyline; heading follows the current segment."""

    def __init__(self, waypoints, speed=1.0, offset=0.0):
        wp = np.asarray(waypoints, dtype=float)
        if offset:
            # positive offsets move the path to the left of the travel direction
            line = LineString(wp).offset_curve(offset, join_style="mitre")
            wp = np.asarray(line.coords, dtype=float)
        seg = np.diff(wp, axis=0)
        keep = np.concatenate([[True], np.linalg.norm(seg, axis=1) > 1e-9])
        self.waypoints = wp[keep]
        if len(self.waypoints) < 2:
            raise ScenarioError("trajectory needs two distinct waypoints")
        self.speed = float(speed)
        seg = np.diff(self.waypoints, axis=0)
        self._seg_len = np.linalg.norm(seg, axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self._headings = [heading_of(s) for s in seg]

    @property
    def length(self):
        return float(self._cum[-1])

    def pose_at_distance(self, s):
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg_len) - 1)
        frac = (s - self._cum[i]) / self._seg_len[i]
        xy = self.waypoints[i] + frac * (self.waypoints[i + 1] - self.waypoints[i])
        return Pose.from_yaw([xy[0], xy[1], 0.0], self._headings[i])

    def pose_at_time(self, t):
        return self.pose_at_distance(self.speed * t)
