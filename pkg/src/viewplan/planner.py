"""
Receding-horizon view planner.

Each cycle predicts the next ``L`` robot poses, builds a local information model
per pose, seeds the window with every step's single-step best point and then
runs gradient descent on

    -lambda_info * sum_t 0.5 * F_t(p_t)**2 + lambda_smo * J_smo(anchor, p_1..p_L)

with every iterate projected back onto its step's sampling circles.  The first
optimised point is handed to the gimbal.
"""

from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np

from .errors import IndexOutOfWindow, NoInformation, NotInitialized, WindowTooShort
from .geometry import Pose, gimbal_ik
from .infomap import NoiseModel
from .infomodel import DEFAULT_DEGREE, build_local_model, curve_derivative, curve_eval, global_best
from .sampling import SamplerParams, evaluate_gains, generate_samples, polar_to_world

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HorizonParams:
    L: int = 6
    lambda_info: float = 1.0
    lambda_smo: float = 0.12
    step_size: float = 0.1
    max_iters: int = 50
    tol: float = 1e-4
    degree: int = DEFAULT_DEGREE
    # divide every gain in a window by the window's largest sample gain
    normalize: bool = True

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("window length L must be at least 2")
        if self.lambda_info < 0 or self.lambda_smo < 0:
            raise ValueError("weights must be non-negative")
        if not (self.tol > 0 and self.step_size > 0 and self.max_iters >= 0):
            raise ValueError("tol and step_size must be positive")


@dataclass
class HorizonPlan:
    anchor_point: np.ndarray
    points: np.ndarray
    future_poses: list
    models: list
    converged: bool = False
    objective_trace: list = field(default_factory=list)
    iterations: int = 0


def predict_poses(current, trajectory=None, dt=0.5, L=6, velocity=None):
    """Future poses at ``dt`` spacing.

    ``trajectory`` is a list of already-timed future poses (first entry one
    ``dt`` ahead); when it runs short the remainder is extrapolated at constant
    velocity.  Without a trajectory, ``velocity`` is extrapolated and yaw held.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    poses = list(trajectory[:L]) if trajectory else []
    if trajectory is not None and len(poses) < L:
        logger.debug("trajectory exhausted: %d of %d samples, extrapolating", len(poses), L)
    if len(poses) >= 2:
        vel = (poses[-1].position - poses[-2].position) / dt
    elif len(poses) == 1:
        vel = (poses[0].position - current.position) / dt
    else:
        vel = np.zeros(3) if velocity is None else np.asarray(velocity, dtype=float)
    last = poses[-1] if poses else current
    while len(poses) < L:
        last = Pose(last.position + vel * dt, last.rotation)
        poses.append(last)
    return poses


def _window(anchor, points):
    seq = np.vstack([np.asarray(anchor, dtype=float)[None, :], np.asarray(points, dtype=float)])
    return seq


def smoothness_cost(anchor, points):
    """Sum of squared second differences over the sequence ``anchor, p_1..p_L``."""
    if len(points) < 2:
        raise WindowTooShort("smoothness needs at least two window points")
    seq = _window(anchor, points)
    e = seq[2:] - 2.0 * seq[1:-1] + seq[:-2]
    return float(np.sum(e * e))


def smoothness_gradients(anchor, points):
    """Gradient of :func:`smoothness_cost` w.r.t. every window point, shape (L, 3)."""
    seq = _window(anchor, points)
    e = seq[2:] - 2.0 * seq[1:-1] + seq[:-2]  # e[m-1] is centred on seq[m]
    grad = np.zeros_like(seq)
    grad[:-2] += 2.0 * e
    grad[1:-1] += -4.0 * e
    grad[2:] += 2.0 * e
    return grad[1:]


def smoothness_gradient(anchor, points, t):
    """Gradient w.r.t. window point ``t`` (0-based).

    With a single second difference touching ``p_t`` this is
    ``-4 (p_{t+1} - 2 p_t + p_{t-1})``; interior points also collect the two
    neighbouring differences.
    """
    if len(points) < 2:
        raise WindowTooShort("smoothness needs at least two window points")
    if not 0 <= t < len(points):
        raise IndexOutOfWindow(f"index {t} outside window of {len(points)}")
    return smoothness_gradients(anchor, points)[t]


def info_gradient(model, point):
    """Gradient of ``0.5 F(p)^2`` along the tangent of the circle ``p`` snaps to."""
    rho, theta = model.polar(point)
    curve = model.curves[model.snap(rho)]
    f = curve_eval(curve, theta)
    df = curve_derivative(curve, theta)
    psi = theta + model.base_yaw
    tangent = np.array([math.cos(psi), -math.sin(psi), 0.0])
    return (f * df / curve.radius) * tangent


def snap_to_model(model, point):
    rho, theta = model.polar(point)
    i = model.snap(rho)
    theta = model.curves[i].clamp(theta)[0]
    return model.point_at(i, theta)


def info_value(models, points):
    return sum(0.5 * m.evaluate(p) ** 2 for m, p in zip(models, points))


def objective(plan, params):
    return -params.lambda_info * info_value(plan.models, plan.points) + params.lambda_smo * smoothness_cost(
        plan.anchor_point, plan.points
    )


def _objective(models, anchor, points, params):
    val = 0.0
    if params.lambda_info:
        val -= params.lambda_info * info_value(models, points)
    if params.lambda_smo:
        val += params.lambda_smo * smoothness_cost(anchor, points)
    return val


def init_window(models):
    return [global_best(m).point for m in models]


def _descend(models, anchor, pts, obj, params, budget):
    """Projected gradient descent with backtracking; returns (points, objective, trace, iterations, converged)."""
    trace = []
    it = 0
    eta_next = params.step_size
    while it < budget:
        it += 1
        grad = np.zeros_like(pts)
        if params.lambda_info:
            grad -= params.lambda_info * np.array([info_gradient(m, p) for m, p in zip(models, pts)])
        if params.lambda_smo:
            grad += params.lambda_smo * smoothness_gradients(anchor, pts)
        if not np.any(grad):
            return pts, obj, trace, it, True
        # warm start: try twice the last accepted step, then halve
        eta = eta_next
        accepted = None
        for _ in range(60):
            cand = np.array([snap_to_model(m, p) for m, p in zip(models, pts - eta * grad)])
            cobj = _objective(models, anchor, cand, params)
            if cobj < obj:
                accepted = cand
                break
            eta *= 0.5
        if accepted is None:
            return pts, obj, trace, it, True
        eta_next = 2.0 * eta
        disp = float(np.max(np.linalg.norm(accepted - pts, axis=1)))
        pts, obj = accepted, cobj
        trace.append(obj)
        if disp < params.tol:
            return pts, obj, trace, it, True
    return pts, obj, trace, it, False


def _hop(models, anchor, pts, obj, params):
    """Best discrete circle change, or None when none lowers the objective.

    Candidates move one point to any other circle, or shift a whole window tail
    ``p_t..p_L`` outward or inward by the same number of circles.  A moved point
    either keeps its angle or jumps to the new curve's maximum.
    """
    L = len(models)
    n = max(len(m.curves) for m in models)
    top = np.array([len(m.curves) - 1 for m in models])
    here = np.empty(L, dtype=int)
    info_now = np.empty(L)
    # targets[t, i, c]: point on circle i of step t, same angle (c = 0) or curve peak (c = 1)
    targets = np.zeros((L, n, 2, 3))
    values = np.full((L, n, 2), -np.inf)
    for t, m in enumerate(models):
        rho, theta = m.polar(pts[t])
        here[t] = m.snap(rho)
        k = len(m.curves)
        same = [c.clamp(theta)[0] for c in m.curves]
        peaks = m.peaks()
        info_now[t] = 0.5 * curve_eval(m.curves[here[t]], theta) ** 2
        values[t, :k, 0] = [0.5 * curve_eval(c, th) ** 2 for c, th in zip(m.curves, same)]
        values[t, :k, 1] = [0.5 * v * v for _, v in peaks]
        psi = np.array([same, [th for th, _ in peaks]]).T + m.base_yaw
        targets[t, :k, :, 0] = m.center_position[0] + m.radii[:, None] * np.sin(psi)
        targets[t, :k, :, 1] = m.center_position[1] + m.radii[:, None] * np.cos(psi)
        targets[t, :k, :, 2] = m.center_position[2]
    rows = []
    for t in range(L):
        for i in range(top[t] + 1):
            if i != here[t]:
                r = here.copy()
                r[t] = i
                rows.append(r)
    steps = np.arange(L)
    for t in range(L - 1):
        for d in range(1 - n, n):
            if d:
                r = np.clip(here + d * (steps >= t), 0, top)
                if np.count_nonzero(r != here) > 1:
                    rows.append(r)
    if not rows:
        return None
    idx = np.repeat(np.array(rows), 2, axis=0)
    climb = np.tile([0, 1], len(rows))
    changed = idx != here[None, :]
    cands = np.where(changed[..., None], targets[steps[None, :], idx, climb[:, None]], pts[None])
    gain = np.where(changed, values[steps[None, :], idx, climb[:, None]] - info_now[None, :], 0.0).sum(axis=1)
    seq = np.concatenate([np.broadcast_to(np.asarray(anchor, dtype=float), (len(cands), 1, 3)), cands], axis=1)
    e = seq[:, 2:] - 2.0 * seq[:, 1:-1] + seq[:, :-2]
    vals = -params.lambda_info * (info_now.sum() + gain) + params.lambda_smo * np.einsum("cij,cij->c", e, e)
    k = int(np.argmin(vals))
    if not vals[k] < obj - 1e-12:
        return None
    # recompute exactly so the accepted objective matches the descent's bookkeeping
    cobj = _objective(models, anchor, cands[k], params)
    return (cands[k], cobj) if cobj < obj else None


# descent iterations between discrete circle-change checks
HOP_EVERY = 10


def rho_optimize(plan, params=HorizonParams()):
    """Synchronous projected gradient descent over all window points with backtracking.

    Gradient steps move points along their circles.  Every ``HOP_EVERY``
    iterations, and whenever descent stalls, the best discrete circle change is
    applied if it lowers the objective.
    """
    if plan.points is None or len(plan.points) != len(plan.models):
        raise NotInitialized("window must be initialised before optimisation")
    models = plan.models
    anchor = plan.anchor_point
    pts = np.array([snap_to_model(m, p) for m, p in zip(models, plan.points)])
    obj = _objective(models, anchor, pts, params)
    trace = [obj]
    iters = 0
    converged = False
    while iters < params.max_iters:
        budget = min(HOP_EVERY, params.max_iters - iters)
        pts, obj, steps, n, converged = _descend(models, anchor, pts, obj, params, budget)
        trace += steps
        iters += n
        hop = _hop(models, anchor, pts, obj, params)
        if hop is None:
            if converged:
                break
            continue
        pts, obj = hop
        trace.append(obj)
        converged = False
    plan.points = pts
    plan.converged = converged
    plan.objective_trace = trace
    plan.iterations = iters
    return plan


@dataclass(frozen=True)
class PlannerConfig:
    sampler: SamplerParams = SamplerParams()
    horizon: HorizonParams = HorizonParams()
    noise: NoiseModel = NoiseModel()
    camera_height: float = 0.5
    dt: float = 0.5


@dataclass
class PlanResult:
    next_point: np.ndarray
    command: object
    diagnostics: dict
    plan: HorizonPlan = None


def camera_position(pose, height):
    return pose.position + np.array([0.0, 0.0, height])


def forward_anchor(pose, sampler):
    return polar_to_world(pose.position, pose.base_yaw, sampler.P_min, 0.0)


def build_models(snapshot, poses, config):
    """Sample, evaluate and fit one local model per pose (gains share one normalisation)."""
    grids = []
    for pose in poses:
        grid = generate_samples(pose.position, pose.base_yaw, config.sampler)
        evaluate_gains(grid, snapshot, camera_position(pose, config.camera_height), config.noise)
        grids.append(grid)
    peak = max(float(g.gains.max()) for g in grids)
    if not peak > 0:
        raise NoInformation("every sample gain is zero")
    scale = peak if config.horizon.normalize else 1.0
    models = [
        build_local_model(g, config.horizon.degree, scale, camera_position(p, config.camera_height))
        for g, p in zip(grids, poses)
    ]
    return grids, models


def plan_step(snapshot, current, trajectory=None, config=PlannerConfig(), anchor=None, velocity=None):
    """One full planning cycle; returns the next landing point and its gimbal command."""
    t0 = time.perf_counter()
    hp = config.horizon
    poses = predict_poses(current, trajectory, config.dt, hp.L, velocity)
    cam = camera_position(current, config.camera_height)
    diag = {"fallback": False}
    try:
        grids, models = build_models(snapshot, poses, config)
    except NoInformation:
        point = forward_anchor(poses[0], config.sampler)
        diag.update(fallback=True, theta=0.0, gain=0.0, plan_time=time.perf_counter() - t0)
        return PlanResult(point, gimbal_ik(cam, current.base_yaw, point), diag)
    t1 = time.perf_counter()
    if anchor is None:
        anchor = forward_anchor(current, config.sampler)
    plan = HorizonPlan(np.asarray(anchor, dtype=float), np.array(init_window(models)), poses, models)
    t2 = time.perf_counter()
    rho_optimize(plan, hp)
    t3 = time.perf_counter()
    point = plan.points[0]
    m0 = models[0]
    _, theta = m0.polar(point)
    diag.update(
        theta=theta,
        gain=m0.evaluate(point) * m0.scale,
        scale=m0.scale,
        residuals=[c.residual for c in m0.curves],
        iterations=plan.iterations,
        converged=plan.converged,
        t_models=t1 - t0,
        t_init=t2 - t1,
        t_optimize=t3 - t2,
        plan_time=t3 - t0,
        grids=grids,
    )
    return PlanResult(point, gimbal_ik(cam, current.base_yaw, point), diag, plan)
