"""Configuration, orchestration, metrics and the command line."""

from .config import ConfigError, ExperimentConfig, build_scenario, load_builtin, load_config, parse_config
from .experiment import ExperimentError, SweepSpec, run_experiment, run_sweep
from .metrics import MetricsLog, detect_convergence, summarize

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentError", "MetricsLog", "SweepSpec", "build_scenario",
           "detect_convergence", "load_builtin", "load_config", "parse_config", "run_experiment", "run_sweep",
           "summarize"]
