"""Cooperative multi-agent environments behind one registry."""

from cammarl.envs.core import (
    DEFAULT_HORIZONS,
    ENV_NAMES,
    Environment,
    EnvSpec,
    JointAction,
    Observation,
    StepOutcome,
    make_env,
    validate_spec,
)

# Importing the concrete modules registers their factories.
from cammarl.envs import foraging, navigation, plates  # noqa: E402,F401

__all__ = [
    "DEFAULT_HORIZONS",
    "ENV_NAMES",
    "Environment",
    "EnvSpec",
    "JointAction",
    "Observation",
    "StepOutcome",
    "make_env",
    "validate_spec",
]
