"""Shared environment contract: simultaneous-move, partially observable, episodic.

Agent 0 is the self agent; agents 1..K-1 are the modeled others.  All K
actions are applied atomically inside ``step``; internal ordering never
affects outcomes except where an environment documents a tie-break.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

ENV_NAMES = ("cn", "lbf", "pressure_plate")

DEFAULT_HORIZONS = {"cn": 25, "lbf": 50, "pressure_plate": 150}


@dataclass
class Observation:
    """Flat numeric feature vector with a documented per-environment layout."""

    values: np.ndarray
    layout_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class JointAction:
    """One discrete action id per agent, in agent-id order."""

    actions: tuple[int, ...]

    def __post_init__(self):
        self.actions = tuple(int(a) for a in self.actions)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class StepOutcome:
    observations: list[Observation]
    rewards: list[float]
    done: bool
    info: dict


@dataclass
class EnvSpec:
    """Declarative description of one environment instance.

    Only the fields relevant to ``env_name`` are consulted; ``horizon=None``
    selects the per-environment default.  Physics constants for the
    navigation arena are exposed so tests can pin them.
    """

    env_name: str
    agent_count: int = 2
    horizon: int | None = None
    # cooperative navigation
    landmark_count: int = 2
    dt: float = 0.1
    damping: float = 0.25
    accel: float = 5.0
    max_speed: float = 1.0
    agent_radius: float = 0.15
    # level-based foraging
    grid_size: int = 12
    food_count: int = 4
    max_agent_level: int = 2
    cooperative: bool = True

    def resolved_horizon(self) -> int:
        if self.horizon is not None:
            return int(self.horizon)
        return DEFAULT_HORIZONS[self.env_name]


class Environment(ABC):
    """reset/step plus static dimension queries."""

    def __init__(self, spec: EnvSpec):
        self.spec = spec

    @property
    def agent_count(self) -> int:
        return self.spec.agent_count

    @property
    def horizon(self) -> int:
        return self.spec.resolved_horizon()

    @abstractmethod
    def observation_dim(self, agent: int) -> int: ...

    @abstractmethod
    def action_count(self, agent: int) -> int: ...

    @abstractmethod
    def reset(self, seed: int) -> list[Observation]: ...

    @abstractmethod
    def step(self, joint: JointAction) -> StepOutcome: ...

    def _check_joint(self, joint: JointAction, done: bool) -> None:
        if done:
            raise RuntimeError("step() called on a finished episode; reset() first")
        if len(joint) != self.agent_count:
            raise ValueError(f"joint action has {len(joint)} entries for {self.agent_count} agents")
        for i, a in enumerate(joint.actions):
            if not 0 <= a < self.action_count(i):
                raise ValueError(f"action {a} out of range for agent {i} "
                                 f"(|A|={self.action_count(i)})")


_REGISTRY: dict[str, tuple[Callable[[EnvSpec], Environment], Callable[[EnvSpec], None]]] = {}


def register(name: str, factory, validator) -> None:
    _REGISTRY[name] = (factory, validator)


def validate_spec(spec: EnvSpec) -> None:
    if spec.env_name not in _REGISTRY:
        raise ValueError(f"unknown env_name {spec.env_name!r}; registered: {sorted(_REGISTRY)}")
    if spec.agent_count < 1:
        raise ValueError(f"agent_count must be >= 1, got {spec.agent_count}")
    if spec.resolved_horizon() < 1:
        raise ValueError(f"horizon must be >= 1, got {spec.resolved_horizon()}")
    _REGISTRY[spec.env_name][1](spec)


def make_env(spec: EnvSpec) -> Environment:
    """Instantiate a registered environment; touches no global state."""
    validate_spec(spec)
    return _REGISTRY[spec.env_name][0](replace(spec))
