"""Experiment harness: config, runner, metrics, CLI."""

from cammarl.experiments.config import ConfigError, ExperimentConfig, load_config, parse_config
from cammarl.experiments.metrics import aggregate_seeds, compare_modes, smooth
from cammarl.experiments.runner import run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "aggregate_seeds",
    "compare_modes",
    "load_config",
    "parse_config",
    "run_experiment",
    "smooth",
]
