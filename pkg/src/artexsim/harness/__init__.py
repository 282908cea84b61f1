"""Scenario runs from config to report, plus the command line."""

from .config import ScenarioConfig, config_schema, load_config
from .report import build_report, render_table
from .scenario import ScenarioResult, decoy_gas_sweep, metrics_by_label, run_scenario
from .templates import Verdict, check_trade

__all__ = [
    "ScenarioConfig", "config_schema", "load_config",
    "build_report", "render_table",
    "ScenarioResult", "decoy_gas_sweep", "metrics_by_label", "run_scenario",
    "Verdict", "check_trade",
]
