"""Scenario configuration, trace export and the ``ppcsim`` command line."""

from .config import SCENARIOS, ConfigError, ScenarioConfig, from_dict, validate_config
from .scenarios import run_scenario

__all__ = ["SCENARIOS", "ConfigError", "ScenarioConfig", "from_dict", "run_scenario",
           "validate_config"]
