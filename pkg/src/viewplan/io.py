"""CSV readers and writers for map layers and information curves."""

import csv

import numpy as np

from .infomap import NoiseModel
from .infomodel import build_local_model, curve_eval
from .planner import PlannerConfig, camera_position
from .sampling import dense_circle_gains, evaluate_gains, generate_samples

LAYER_HEADER = ("kx", "ky", "kz", "cx", "cy", "cz", "fisher", "dist", "weighted")
CURVE_HEADER = ("circle", "theta", "gain_raw", "gain_fit")


def read_cloud(path):
    """``x,y,z`` rows; blank lines, ``#`` comments and a non-numeric header are skipped."""
    rows = []
    header_allowed = True
    with open(path, newline="") as fh:
        for n, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if header_allowed:
                    header_allowed = False
                    continue
                raise ValueError(f"{path}:{n + 1}: non-numeric row {row!r}") from None
            header_allowed = False
            if len(vals) != 3:
                raise ValueError(f"{path}:{n + 1}: expected 3 columns, got {len(vals)}")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, 3)


def write_layers(imap, camera, path, noise=NoiseModel()):
    rows = imap.dump_layers(camera, noise)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LAYER_HEADER)
        for r in rows:
            w.writerow(
                [*r.key, *(f"{c:.6f}" for c in r.center), repr(r.fisher), repr(r.dist), repr(r.weighted)]
            )
    return len(rows)


def curve_table(snapshot, pose, config=PlannerConfig(), step=0.01):
    """Dense gains and their polynomial fit along every circle around ``pose``.

    Returns rows ``(circle, theta, gain_raw, gain_fit)``.
    """
    cam = camera_position(pose, config.camera_height)
    grid = evaluate_gains(generate_samples(pose.position, pose.base_yaw, config.sampler), snapshot, cam, config.noise)
    model = build_local_model(grid, config.horizon.degree)
    rows = []
    for curve in model.curves:
        th, raw = dense_circle_gains(
            snapshot, cam, pose.position, pose.base_yaw, curve.radius, config.sampler, config.noise, step
        )
        rows.extend((curve.circle_index, t, g, curve_eval(curve, t)) for t, g in zip(th.tolist(), raw.tolist()))
    return rows


def write_curves(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c, t, g, f in rows:
            w.writerow([c, f"{t:.2f}", f"{g:.6f}", f"{f:.6f}"])
