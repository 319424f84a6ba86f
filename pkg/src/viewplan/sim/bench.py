"""Per (scenario, planner) aggregation of simulated runs."""

from dataclasses import dataclass, asdict, fields
import csv
import io
import logging
import math

import numpy as np

from ..geometry import wrap_angle
from .harness import run_scenario

logger = logging.getLogger(__name__)

# columns that depend on wall-clock time and therefore differ between runs
TIMING_COLUMNS = ("plan_ms_mean", "plan_ms_median")


@dataclass
class BenchRow:
    scenario: str
    planner: str
    steps: int
    ok_steps: int
    failures: int
    crlb_mean: float
    crlb_max: float
    yaw_tv: float
    max_abs_rel_yaw: float
    plan_ms_mean: float
    plan_ms_median: float


def yaw_total_variation(records):
    """Sum of wrapped absolute changes of the commanded gimbal yaw."""
    yaws = [r.cmd_yaw for r in records]
    return float(sum(abs(wrap_angle(b - a)) for a, b in zip(yaws[:-1], yaws[1:])))


def summarize(name, planner, records):
    ok = [r.crlb for r in records if r.ok]
    times = [r.plan_time for r in records if not math.isnan(r.plan_time)]
    return BenchRow(
        scenario=name,
        planner=planner,
        steps=len(records),
        ok_steps=len(ok),
        failures=len(records) - len(ok),
        crlb_mean=float(np.mean(ok)) if ok else math.inf,
        crlb_max=float(np.max(ok)) if ok else math.inf,
        yaw_tv=yaw_total_variation(records),
        max_abs_rel_yaw=float(max((abs(r.rel_yaw) for r in records), default=0.0)),
        plan_ms_mean=1e3 * float(np.mean(times)) if times else math.nan,
        plan_ms_median=1e3 * float(np.median(times)) if times else math.nan,
    )


def bench(scenarios, planners, timing=True, keep_records=False):
    """Run every scenario under every planner.

    Returns the report rows, plus ``{(scenario, planner): records}`` when
    ``keep_records`` is set.
    """
    rows, runs = [], {}
    for sc in scenarios:
        for planner in planners:
            run = sc.model_copy(update={"planner": planner})
            run._base_dir = sc._base_dir
            logger.info("running %s with %s", sc.name, planner)
            recs = run_scenario(run, timing=timing)
            rows.append(summarize(sc.name, planner, recs))
            if keep_records:
                runs[(sc.name, planner)] = recs
    return (rows, runs) if keep_records else rows


def _cell(v):
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf"
        return f"{v:.6f}"
    return str(v)


def report_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(BenchRow)])
    for r in rows:
        w.writerow([_cell(v) for v in asdict(r).values()])
    return buf.getvalue()


def report_text(rows):
    head = f"{'scenario':<14}{'planner':<8}{'fail':>5}{'crlb mean':>11}{'crlb max':>11}{'yaw TV':>9}{'max|rel|':>10}{'ms med':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.scenario:<14}{r.planner:<8}{r.failures:>5}{r.crlb_mean:>11.4f}{r.crlb_max:>11.4f}"
            f"{r.yaw_tv:>9.3f}{r.max_abs_rel_yaw:>10.3f}{r.plan_ms_median:>8.2f}"
        )
    lines.append("crlb: trace of the inverse summed bearing FIM over tracked steps (localisation proxy, not a pose error)")
    return "\n".join(lines)
