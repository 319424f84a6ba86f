"""
Deterministic closed-loop simulation.

Each planning instant ``t_k = k * dt``: the robot pose is read off the
trajectory, currently visible features are inserted into the map, the
localisation proxy is evaluated for the actual camera orientation, the
configured planner picks a landing point and the gimbal is stepped toward it
at 100 Hz while the robot keeps moving until ``t_{k+1}``.
"""

from dataclasses import dataclass
import csv
import io
import logging
import math
import time

import numpy as np

from ..errors import DegenerateVertical, PlannerAbort, ViewPlanError, ZeroRange
from ..geometry import GimbalCommand, GimbalState, gimbal_ik, gimbal_track_step, wrap_angle
from ..infomap import InfoMap
from .baselines import BaselineContext, make_planner
from .scenario import generate_field
from .sensing import SensorParams, camera_pose, in_frustum, localization_crlb

logger = logging.getLogger(__name__)

TELEMETRY_HEADER = (
    "step,t,x,y,z,yaw_base,planner,px,py,pz,cmd_yaw,cmd_pitch,act_yaw,act_pitch,rel_yaw,visible,crlb,ok,plan_ms,gain"
)


@dataclass
class StepRecord:
    step: int
    t: float
    position: np.ndarray
    base_yaw: float
    planner: str
    point: np.ndarray
    cmd_yaw: float
    cmd_pitch: float
    act_yaw: float
    act_pitch: float
    rel_yaw: float
    visible: int
    crlb: float
    ok: bool
    plan_time: float
    gain: float


def body_pitch(terrain, t):
    if not terrain.amplitude:
        return 0.0
    return terrain.amplitude * math.sin(2.0 * math.pi * t / terrain.period)


def relative_yaw(pose, point):
    """Angle between the motion direction and the horizontal direction to ``point``."""
    d = np.asarray(point, dtype=float) - pose.position
    if math.hypot(d[0], d[1]) < 1e-9:
        return 0.0
    return wrap_angle(math.atan2(d[0], d[1]) - pose.base_yaw)


def _track_command(outcome, cam, pose, gimbal, tilt, compensate):
    if outcome.fixed_view:
        return outcome.command
    try:
        cmd = gimbal_ik(cam, pose.base_yaw, outcome.point)
    except DegenerateVertical:
        cmd = gimbal_ik(cam, pose.base_yaw, outcome.point, hold_yaw=gimbal.yaw)
    except ZeroRange:
        return outcome.command
    if compensate and tilt:
        cmd = GimbalCommand(cmd.yaw_target, cmd.pitch_target + tilt, cmd.yaw_held)
    return cmd


def run_scenario(scenario, timing=False, field=None, on_step=None):
    """Simulate ``scenario`` and return its :class:`StepRecord` list.

    ``field`` overrides the generated feature set.  ``on_step`` receives
    ``(record, outcome, snapshot)`` after every planning instant.  A planner
    error raises :class:`PlannerAbort` carrying the records produced so far.
    """
    n = scenario.n_steps()
    records = []
    if n == 0:
        return records
    feats = generate_field(scenario) if field is None else np.asarray(field, dtype=float).reshape(-1, 3)
    seen = np.zeros(len(feats), dtype=bool)
    traj = scenario.build_trajectory()
    config = scenario.planner_config()
    sensor = SensorParams.from_settings(scenario.sensor)
    ctx = BaselineContext(
        config, sensor, scenario.gimbal.default_pitch, scenario.usv_views, scenario.mst_samples,
        scenario.mst_radius, scenario.seed,
    )
    plan = make_planner(scenario.planner, ctx)
    g = scenario.gimbal
    # the gimbal starts in the passive forward view
    pitch0 = min(max(g.default_pitch, g.pitch_limits[0]), g.pitch_limits[1])
    gimbal = GimbalState(0.0, pitch0, tuple(g.yaw_limits), tuple(g.pitch_limits), g.max_rate, g.tick)
    noise = config.noise
    dropout = scenario.sensor.dropout
    compensate = scenario.planner != "pas"
    sub_ticks = max(1, int(round(scenario.dt / g.tick)))
    imap = InfoMap(scenario.voxel_size)

    for k in range(n):
        t = k * scenario.dt
        pose = traj.pose_at_time(t)
        tilt = body_pitch(scenario.terrain, t)
        cam = camera_pose(pose, gimbal.yaw, gimbal.pitch, sensor.camera_height, tilt)
        mask = in_frustum(cam, feats, sensor)
        visible = feats[mask]
        fresh = mask & ~seen
        if dropout > 0:
            rng = np.random.default_rng([scenario.seed, k, 11])
            fresh &= rng.uniform(size=len(feats)) >= dropout
        seen |= fresh
        if fresh.any():
            imap.insert_points(feats[fresh])
        crlb, ok = localization_crlb(visible, cam, noise, sensor.min_track_features)
        snapshot = imap.snapshot()
        future = [traj.pose_at_time(t + j * scenario.dt) for j in range(1, config.horizon.L + 1)]
        t0 = time.perf_counter()
        try:
            outcome = plan(snapshot, pose, future, k)
        except ViewPlanError as exc:
            raise PlannerAbort(f"step {k}: {exc}", records) from exc
        elapsed = time.perf_counter() - t0
        rec = StepRecord(
            k, t, pose.position.copy(), pose.base_yaw, scenario.planner, np.asarray(outcome.point, dtype=float),
            outcome.command.yaw_target, outcome.command.pitch_target, gimbal.yaw, gimbal.pitch,
            relative_yaw(pose, outcome.point) if not outcome.fixed_view else outcome.command.yaw_target,
            int(len(visible)), crlb, ok, elapsed if timing else math.nan, float(outcome.gain),
        )
        records.append(rec)
        if on_step is not None:
            on_step(rec, outcome, snapshot)
        for j in range(sub_ticks):
            ts = t + j * g.tick
            p = traj.pose_at_time(ts)
            c = p.position + np.array([0.0, 0.0, sensor.camera_height])
            cmd = _track_command(outcome, c, p, gimbal, body_pitch(scenario.terrain, ts), compensate)
            gimbal = gimbal_track_step(gimbal, cmd)
    return records


def _f(v, digits=6):
    if isinstance(v, float) and not math.isfinite(v):
        return "" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return f"{v:.{digits}f}"


def telemetry_rows(records):
    for r in records:
        yield [
            str(r.step), _f(r.t, 3), _f(r.position[0]), _f(r.position[1]), _f(r.position[2]), _f(r.base_yaw),
            r.planner, _f(r.point[0]), _f(r.point[1]), _f(r.point[2]), _f(r.cmd_yaw), _f(r.cmd_pitch),
            _f(r.act_yaw), _f(r.act_pitch), _f(r.rel_yaw), str(r.visible), _f(r.crlb, 9), "1" if r.ok else "0",
            _f(r.plan_time * 1e3, 3), _f(r.gain),
        ]


def telemetry_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TELEMETRY_HEADER.split(","))
    w.writerows(telemetry_rows(records))
    return buf.getvalue()


def write_telemetry(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(telemetry_csv(records))
