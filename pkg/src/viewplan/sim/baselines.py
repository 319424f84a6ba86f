"""
Planners compared in the simulator.

``pas``   fixed forward camera.
``usv``   ten yaw candidates, each scored by the information inside its frustum.
``mst``   500 random landing points in a 5 m disk, scored by neighbour sums.
``rsdt``  best sample of the polar lattice (penalised gain), no regression or horizon.
``iglov`` the receding-horizon planner.

The ``usv`` and ``mst`` scorers deliberately scan the whole map, as they have no
local structure to exploit.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ..errors import DegenerateVertical
from ..geometry import GimbalCommand, gimbal_ik, ground_intersection
from ..planner import PlannerConfig, camera_position, forward_anchor, plan_step
from ..sampling import best_overall, evaluate_gains, generate_samples
from .sensing import SensorParams, camera_pose, in_frustum


@dataclass
class Outcome:
    point: np.ndarray
    command: object
    gain: float = 0.0
    fallback: bool = False
    # the command is a view direction to hold, not a point to keep tracking
    fixed_view: bool = False
    extra: dict = field(default_factory=dict)


@dataclass
class BaselineContext:
    config: PlannerConfig = PlannerConfig()
    sensor: SensorParams = SensorParams()
    default_pitch: float = 0.124
    usv_views: int = 10
    mst_samples: int = 500
    mst_radius: float = 5.0
    seed: int = 0


def _ik(cam, pose, point, hold_yaw=0.0):
    try:
        return gimbal_ik(cam, pose.base_yaw, point)
    except DegenerateVertical:
        return gimbal_ik(cam, pose.base_yaw, point, hold_yaw=hold_yaw)


def _view_point(cam, pose, yaw, pitch):
    p = ground_intersection(cam, pose.base_yaw, yaw, pitch, ground_z=pose.position[2])
    return p if p is not None else cam.copy()


def pas_plan(snapshot, pose, ctx=BaselineContext(), step=0):
    cam = camera_position(pose, ctx.config.camera_height)
    cmd = GimbalCommand(0.0, ctx.default_pitch)
    return Outcome(_view_point(cam, pose, 0.0, ctx.default_pitch), cmd, fixed_view=True)


def usv_yaws(n):
    return [-math.pi + 2.0 * math.pi * k / n for k in range(n)]


def usv_scores(snapshot, pose, ctx=BaselineContext()):
    cam_pos = camera_position(pose, ctx.config.camera_height)
    yaws = usv_yaws(ctx.usv_views)
    if not len(snapshot):
        return yaws, np.zeros(len(yaws))
    w = snapshot.weighted_info(cam_pos, None, ctx.config.noise)
    scores = []
    for yaw in yaws:
        cam = camera_pose(pose, yaw, ctx.default_pitch, ctx.config.camera_height)
        scores.append(float(w[in_frustum(cam, snapshot.centers, ctx.sensor)].sum()))
    return yaws, np.array(scores)


def usv_plan(snapshot, pose, ctx=BaselineContext(), step=0):
    cam = camera_position(pose, ctx.config.camera_height)
    yaws, scores = usv_scores(snapshot, pose, ctx)
    if not np.any(scores > 0):
        point = forward_anchor(pose, ctx.config.sampler)
        return Outcome(point, _ik(cam, pose, point), 0.0, True)
    best = min(range(len(yaws)), key=lambda k: (-scores[k], abs(yaws[k]), yaws[k]))
    cmd = GimbalCommand(yaws[best], ctx.default_pitch)
    return Outcome(_view_point(cam, pose, yaws[best], ctx.default_pitch), cmd, float(scores[best]), fixed_view=True)


def mst_candidates(pose, ctx=BaselineContext(), step=0):
    rng = np.random.default_rng([ctx.seed, step, 7])
    n = ctx.mst_samples
    r = ctx.mst_radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    a = rng.uniform(-math.pi, math.pi, n)
    return pose.position + np.column_stack([r * np.sin(a), r * np.cos(a), np.zeros(n)])


def mst_plan(snapshot, pose, ctx=BaselineContext(), step=0):
    cam = camera_position(pose, ctx.config.camera_height)
    pts = mst_candidates(pose, ctx, step)
    scores = snapshot.neighbor_sums(cam, pts, ctx.config.sampler.d_n, ctx.config.noise, use_index=False)
    if not np.any(scores > 0):
        point = forward_anchor(pose, ctx.config.sampler)
        return Outcome(point, _ik(cam, pose, point), 0.0, True)
    k = int(np.argmax(scores))
    return Outcome(pts[k], _ik(cam, pose, pts[k]), float(scores[k]))


def rsdt_plan(snapshot, pose, ctx=BaselineContext(), step=0):
    cfg = ctx.config
    cam = camera_position(pose, cfg.camera_height)
    grid = evaluate_gains(generate_samples(pose.position, pose.base_yaw, cfg.sampler), snapshot, cam, cfg.noise)
    if not np.any(grid.gains > 0):
        point = forward_anchor(pose, cfg.sampler)
        return Outcome(point, _ik(cam, pose, point), 0.0, True)
    best = best_overall(grid)
    return Outcome(best.world_position, _ik(cam, pose, best.world_position), best.gain, extra={"theta": best.theta})


class HorizonPlanner:
    """Stateful wrapper: the previously executed point anchors the next window."""

    def __init__(self, ctx=BaselineContext()):
        self.ctx = ctx
        self.anchor = None

    def __call__(self, snapshot, pose, future, step=0):
        res = plan_step(snapshot, pose, future, self.ctx.config, anchor=self.anchor)
        self.anchor = res.next_point
        return Outcome(res.next_point, res.command, res.diagnostics.get("gain", 0.0), res.diagnostics["fallback"],
                       extra={"diagnostics": res.diagnostics, "plan": res.plan})


def make_planner(name, ctx=BaselineContext()):
    """Callable ``(snapshot, pose, future, step) -> Outcome`` for a planner name."""
    if name == "iglov":
        return HorizonPlanner(ctx)
    fn = {"pas": pas_plan, "usv": usv_plan, "mst": mst_plan, "rsdt": rsdt_plan}.get(name)
    if fn is None:
        raise ValueError(f"unknown planner {name!r}")
    return lambda snapshot, pose, future, step=0: fn(snapshot, pose, ctx, step)
