"""Multi-agent RL with conformal action modeling.

A self agent augments its observation with conformal prediction sets over
the other agents' actions.  The package provides three cooperative
environments, a small dense-network engine, independent PPO learners, a
regularized adaptive prediction-set (RAPS) conformal predictor, the
modeling-mode layer that ties them together, and an experiment runner.
"""

from cammarl.envs import EnvSpec, JointAction, Observation, StepOutcome, make_env
from cammarl.modes import ModelingMode

__all__ = [
    "EnvSpec",
    "JointAction",
    "Observation",
    "StepOutcome",
    "ModelingMode",
    "make_env",
]

__version__ = "0.1.0"
