"""Config-driven reproduction studies: estimation, MSPE curves, prediction and convergence ladders."""

from .config import MODES, ConfigError, Scenario, list_presets, load_scenario, parse_config, scenario_from_mapping
from .runner import BASE_COLUMNS, ResultTable, mode_columns, run_scenario, summarize, write_outputs

__all__ = [
    "BASE_COLUMNS",
    "MODES",
    "ConfigError",
    "ResultTable",
    "Scenario",
    "list_presets",
    "load_scenario",
    "mode_columns",
    "parse_config",
    "run_scenario",
    "scenario_from_mapping",
    "summarize",
    "write_outputs",
]
