"""Command-line front end."""

from .config import (ExperimentConfig, ConfigErrors, apply_overrides, dump_config, load_config,
                     parse_config, validate_tree)
from .main import run

__all__ = ["ExperimentConfig", "ConfigErrors", "apply_overrides", "dump_config", "load_config",
           "parse_config", "validate_tree", "run"]
