"""Configuration, experiment orchestration and output emission."""

from .config import DEFAULTS, EXPERIMENTS, PRESETS, build_config, load_config, validate
from .outputs import RunReport, emit_outputs
from .runner import run_experiment

__all__ = ["DEFAULTS", "EXPERIMENTS", "PRESETS", "RunReport", "build_config", "emit_outputs",
           "load_config", "run_experiment", "validate"]
