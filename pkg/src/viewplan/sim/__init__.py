"""Desk-scale simulator, baseline planners and benchmark harness."""

from .harness import StepRecord, run_scenario, telemetry_csv, write_telemetry
from .scenario import Scenario, generate_field, load_scenario, parse_scenario
