"""Command-line entry point: ``viewplan map|plan|bench``."""

import argparse
import logging
import os
from pathlib import Path
import sys

import numpy as np

from .errors import PlannerAbort, ScenarioError
from .infomap import DEFAULT_VOXEL_SIZE, InfoMap, NoiseModel
from .io import curve_table, read_cloud, write_curves, write_layers

logger = logging.getLogger("viewplan")

EXIT_OK, EXIT_SCENARIO, EXIT_ABORT = 0, 2, 3
PLANNER_NAMES = ("pas", "usv", "mst", "rsdt", "iglov")


def _vec3(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return np.array(vals)


def _planners(text):
    names = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in names if p not in PLANNER_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown planner(s) {bad}; choose from {','.join(PLANNER_NAMES)}")
    return names


def build_parser():
    p = argparse.ArgumentParser(prog="viewplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("map", help="build an information map from a point cloud and dump its layers")
    m.add_argument("--cloud", required=True, help="x,y,z CSV point cloud")
    m.add_argument("--camera", required=True, type=_vec3, help="camera position x,y,z")
    m.add_argument("--out", required=True)
    m.add_argument("--voxel-size", type=float, default=DEFAULT_VOXEL_SIZE)
    m.add_argument("--noise", choices=("isotropic", "depth_dependent"), default="isotropic")
    m.add_argument("--fig-dir")

    pl = sub.add_parser("plan", help="simulate one scenario and write its telemetry")
    pl.add_argument("--scenario", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--planner", choices=PLANNER_NAMES, help="override the scenario's planner")
    pl.add_argument("--seed", type=int)
    pl.add_argument("--curves", help="write dense and fitted gain curves of one step")
    pl.add_argument("--curve-step", type=int, help="step for --curves (default: middle of the run)")
    pl.add_argument("--timing", action="store_true", help="fill the plan_ms column (makes output non-reproducible)")
    pl.add_argument("--fig-dir")

    b = sub.add_parser("bench", help="compare planners over a directory of scenarios")
    b.add_argument("--scenario-dir", required=True)
    b.add_argument("--planners", type=_planners, default=list(PLANNER_NAMES))
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--fig-dir")
    return p


def cmd_map(args):
    pts = read_cloud(args.cloud)
    noise = NoiseModel(mode=args.noise)
    imap = InfoMap(args.voxel_size).insert_points(pts)
    n = write_layers(imap, args.camera, args.out, noise)
    logger.info("%d points, %d voxels -> %s", len(pts), n, args.out)
    if args.fig_dir:
        from .plotting import plot_layers

        plot_layers(imap.dump_layers(args.camera, noise), os.path.join(args.fig_dir, "layers.png"))
    return EXIT_OK


def cmd_plan(args):
    from .sim.harness import run_scenario, write_telemetry
    from .sim.scenario import generate_field, load_scenario

    sc = load_scenario(args.scenario, seed=args.seed, planner=args.planner)
    n = sc.n_steps()
    want = (n // 2 if args.curve_step is None else args.curve_step) if args.curves else None
    captured = {}

    def on_step(rec, outcome, snapshot):
        if rec.step == want:
            traj_pose = sc.build_trajectory().pose_at_time(rec.t)
            captured["rows"] = curve_table(snapshot, traj_pose, sc.planner_config())

    status = EXIT_OK
    try:
        records = run_scenario(sc, timing=args.timing, on_step=on_step)
    except PlannerAbort as exc:
        logger.error("planner aborted: %s", exc)
        records, status = exc.records, EXIT_ABORT
    write_telemetry(records, args.out)
    logger.info("%d steps -> %s", len(records), args.out)
    if args.curves:
        if "rows" not in captured:
            logger.error("curve step %s outside the run (0..%d)", want, n - 1)
            return status or EXIT_SCENARIO
        write_curves(captured["rows"], args.curves)
    if args.fig_dir:
        from . import plotting

        runs = {sc.planner: records}
        plotting.plot_yaw(runs, os.path.join(args.fig_dir, f"{sc.name}_yaw.png"))
        plotting.plot_crlb(runs, os.path.join(args.fig_dir, f"{sc.name}_crlb.png"))
        plotting.plot_top_view(generate_field(sc), records, os.path.join(args.fig_dir, f"{sc.name}_top.png"), sc.name)
        if "rows" in captured:
            plotting.plot_curves(captured["rows"], os.path.join(args.fig_dir, f"{sc.name}_curves.png"))
    return status


def cmd_bench(args):
    from .sim.bench import bench, report_csv, report_text
    from .sim.scenario import load_scenario

    files = sorted(Path(args.scenario_dir).glob("*.json"))
    if not files:
        raise ScenarioError(f"no scenario files in {args.scenario_dir}")
    scenarios = [load_scenario(f, seed=args.seed) for f in files]
    try:
        rows, runs = bench(scenarios, args.planners, keep_records=True)
    except PlannerAbort as exc:
        logger.error("planner aborted: %s", exc)
        return EXIT_ABORT
    Path(args.out).write_text(report_csv(rows))
    print(report_text(rows))
    if args.fig_dir:
        from . import plotting

        for sc in scenarios:
            sel = {p: runs[(sc.name, p)] for p in args.planners}
            plotting.plot_yaw(sel, os.path.join(args.fig_dir, f"{sc.name}_yaw.png"))
            plotting.plot_crlb(sel, os.path.join(args.fig_dir, f"{sc.name}_crlb.png"))
        times = {}
        for (name, p), recs in runs.items():
            times.setdefault(p, []).extend(r.plan_time for r in recs)
        plotting.plot_plan_times(times, os.path.join(args.fig_dir, "plan_times.png"))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = {"map": cmd_map, "plan": cmd_plan, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except ScenarioError as exc:
        logger.error("invalid scenario: %s", exc)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
