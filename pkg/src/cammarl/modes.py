"""Modeling modes: what the self agent gets to know about the others.

Baselines range from nothing (NOAM) through privileged true actions or
observations (TAAM/TOAM/GIAM) to classifier outputs (EAP/APU) and conformal
prediction sets in three encodings (binary membership, rank-padded ids, or
the classifier's penultimate embedding).  Each mode appends one fixed-width
block per other agent, in ascending agent id, after the self observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cammarl import conformal, nn
from cammarl.envs.core import Environment

BASE_TAGS = ("noam", "taam", "toam", "giam", "eap", "apu", "cammarl")
CAMMARL_VARIANTS = ("binary", "padding", "penultimate")

VALID_MODE_NAMES = tuple(t for t in BASE_TAGS if t != "cammarl") + tuple(
    f"cammarl-{v}" for v in CAMMARL_VARIANTS
)


@dataclass(frozen=True)
class ModelingMode:
    tag: str
    variant: str | None = None

    def __post_init__(self):
        if self.tag not in BASE_TAGS:
            raise ValueError(f"unknown mode tag {self.tag!r}; valid modes: {VALID_MODE_NAMES}")
        if self.tag == "cammarl":
            if self.variant not in CAMMARL_VARIANTS:
                raise ValueError(f"cammarl requires a variant in {CAMMARL_VARIANTS}, "
                                 f"got {self.variant!r}")
        elif self.variant is not None:
            raise ValueError(f"mode {self.tag!r} takes no variant")

    @classmethod
    def parse(cls, name: str) -> "ModelingMode":
        key = name.strip().lower()
        if key.startswith("cammarl-"):
            return cls("cammarl", key.split("-", 1)[1])
        if key == "cammarl":
            raise ValueError(f"mode 'cammarl' needs a variant; valid modes: {VALID_MODE_NAMES}")
        if key not in VALID_MODE_NAMES:
            raise ValueError(f"unknown mode {name!r}; valid modes: {VALID_MODE_NAMES}")
        return cls(key)

    @property
    def name(self) -> str:
        return self.tag if self.variant is None else f"{self.tag}-{self.variant}"

    @property
    def carries_model(self) -> bool:
        """Only these modes instantiate an action classifier."""
        return self.tag in ("eap", "apu", "cammarl")

    @property
    def needs_true_action(self) -> bool:
        return self.tag in ("taam", "giam")


@dataclass
class OtherAgentInfo:
    """Per-step record about one other agent, as available to the self agent."""

    agent_id: int
    observation: np.ndarray
    action: int | None = None


def encode_binary(conformal_set: conformal.ConformalSet, action_count: int) -> np.ndarray:
    """Membership bits: 1 at each action id in the set."""
    vec = np.zeros(action_count)
    for a in conformal_set.actions:
        if not 0 <= a < action_count:
            raise ValueError(f"action id {a} out of range for {action_count} actions")
        vec[a] = 1.0
    return vec


def encode_padded(conformal_set: conformal.ConformalSet, action_count: int) -> np.ndarray:
    """Ranked 1-based action ids, most probable first, right-padded with 0.

    The shift to 1-based ids keeps the pad value distinct from action 0.
    """
    if len(conformal_set.actions) > action_count:
        raise ValueError("set larger than the action space")
    vec = np.zeros(action_count)
    for pos, a in enumerate(conformal_set.actions):
        if not 0 <= a < action_count:
            raise ValueError(f"action id {a} out of range for {action_count} actions")
        vec[pos] = a + 1.0
    return vec


def block_dim(mode: ModelingMode, obs_dim_other: int, action_count_other: int) -> int:
    """Width of the augmentation block contributed by one other agent."""
    if mode.tag == "noam":
        return 0
    if mode.tag in ("taam", "eap", "apu"):
        return action_count_other
    if mode.tag == "toam":
        return obs_dim_other
    if mode.tag == "giam":
        return obs_dim_other + action_count_other
    if mode.variant == "penultimate":
        return nn.HIDDEN_SIZE
    return action_count_other  # cammarl binary / padding


def augmented_dim(mode: ModelingMode, env: Environment, agent_id: int = 0) -> int:
    """Input width of the self agent's actor under this mode."""
    total = env.observation_dim(agent_id)
    for j in range(env.agent_count):
        if j == agent_id:
            continue
        total += block_dim(mode, env.observation_dim(j), env.action_count(j))
    return total


def _one_hot(index: int, size: int) -> np.ndarray:
    if not 0 <= index < size:
        raise ValueError(f"action {index} out of range for {size} actions")
    vec = np.zeros(size)
    vec[index] = 1.0
    return vec


def augment_observation(
    mode: ModelingMode,
    o_self: np.ndarray,
    others: list[OtherAgentInfo],
    models: dict[int, conformal.ConformalModel],
    rng: np.random.Generator,
    action_counts: dict[int, int],
) -> np.ndarray:
    """Concatenate the mode's block for every other agent after o_self."""
    parts = [np.asarray(o_self, dtype=np.float64)]
    for info in sorted(others, key=lambda rec: rec.agent_id):
        n_actions = action_counts[info.agent_id]
        if mode.tag == "noam":
            continue
        if mode.needs_true_action and info.action is None:
            raise ValueError(f"mode {mode.name} needs the true action of agent {info.agent_id}")
        if mode.tag == "taam":
            parts.append(_one_hot(info.action, n_actions))
        elif mode.tag == "toam":
            parts.append(np.asarray(info.observation, dtype=np.float64))
        elif mode.tag == "giam":
            parts.append(np.asarray(info.observation, dtype=np.float64))
            parts.append(_one_hot(info.action, n_actions))
        else:
            model = models[info.agent_id]
            if mode.tag == "eap":
                probs = model.probabilities(info.observation)
                parts.append(_one_hot(int(np.argmax(probs)), n_actions))
            elif mode.tag == "apu":
                parts.append(model.probabilities(info.observation))
            elif mode.variant == "penultimate":
                parts.append(conformal.penultimate_embedding(model, info.observation))
            else:
                pred = conformal.predict_for_agent(model, info.observation, rng)
                if mode.variant == "binary":
                    parts.append(encode_binary(pred, n_actions))
                else:
                    parts.append(encode_padded(pred, n_actions))
    return np.concatenate(parts) if len(parts) > 1 else parts[0]
