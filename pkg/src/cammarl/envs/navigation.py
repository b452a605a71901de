"""Cooperative navigation: point agents cover landmarks in a continuous arena.

Agents accelerate on a chosen axis, drift with damping, and share one team
reward: the negated sum over landmarks of the distance to the closest
agent, minus one per colliding pair per step.

Observation layout (``layout_id="cn/v1"``), all in arena units:
  [own velocity (2), own position (2),
   landmark positions relative to self (2L),
   other agents' positions relative to self (2(K-1)),
   other agents' velocities (2(K-1))]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cammarl.envs.core import EnvSpec, Environment, JointAction, Observation, StepOutcome, register

# 0: stay, 1: left (-x), 2: right (+x), 3: down (-y), 4: up (+y)
CN_ACTION_COUNT = 5
_ACTION_AXIS = np.array([[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])

ARENA_LOW, ARENA_HIGH = -1.0, 1.0


@dataclass
class CnWorld:
    positions: np.ndarray   # (K, 2)
    velocities: np.ndarray  # (K, 2)
    landmarks: np.ndarray   # (L, 2)
    radius: float
    clock: int = 0


def cn_reward(agent_positions, landmark_positions, collision_count: int) -> float:
    """Team reward: -sum over landmarks of min agent distance, minus collisions."""
    agents = np.atleast_2d(np.asarray(agent_positions, dtype=np.float64))
    landmarks = np.atleast_2d(np.asarray(landmark_positions, dtype=np.float64))
    if landmarks.shape[0] == 0:
        raise ValueError("at least one landmark required")
    if collision_count < 0:
        raise ValueError("collision_count must be >= 0")
    diffs = agents[:, None, :] - landmarks[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    return float(-dists.min(axis=0).sum() - collision_count)


def count_collisions(positions: np.ndarray, radius: float) -> int:
    """Unordered agent pairs closer than twice the agent radius."""
    k = positions.shape[0]
    count = 0
    for i in range(k):
        for j in range(i + 1, k):
            if np.linalg.norm(positions[i] - positions[j]) < 2.0 * radius:
                count += 1
    return count


def cn_integrate(world: CnWorld, joint: JointAction, spec: EnvSpec) -> CnWorld:
    """One damped Euler step: v <- (1-damping) v + accel dt; p <- p + v dt.

    Speed is clamped to ``max_speed`` and positions to the arena square.
    """
    acc = _ACTION_AXIS[list(joint.actions)] * spec.accel
    v = (1.0 - spec.damping) * world.velocities + acc * spec.dt
    speed = np.linalg.norm(v, axis=1)
    over = speed > spec.max_speed
    if over.any():
        v[over] *= (spec.max_speed / speed[over])[:, None]
    p = world.positions + v * spec.dt
    p = np.clip(p, ARENA_LOW, ARENA_HIGH)
    return CnWorld(positions=p, velocities=v, landmarks=world.landmarks,
                   radius=world.radius, clock=world.clock + 1)


def cn_observe(world: CnWorld, agent: int) -> Observation:
    k = world.positions.shape[0]
    if not 0 <= agent < k:
        raise ValueError(f"agent {agent} out of range")
    own_p = world.positions[agent]
    own_v = world.velocities[agent]
    others = [j for j in range(k) if j != agent]
    parts = [own_v, own_p, (world.landmarks - own_p).ravel()]
    if others:
        parts.append((world.positions[others] - own_p).ravel())
        parts.append(world.velocities[others].ravel())
    return Observation(values=np.concatenate(parts), layout_id="cn/v1")


class CooperativeNavigationEnv(Environment):
    def __init__(self, spec: EnvSpec):
        super().__init__(spec)
        self._world: CnWorld | None = None
        self._done = True

    def observation_dim(self, agent: int) -> int:
        return 4 + 2 * self.spec.landmark_count + 4 * (self.agent_count - 1)

    def action_count(self, agent: int) -> int:
        return CN_ACTION_COUNT

    def reset(self, seed: int) -> list[Observation]:
        rng = np.random.default_rng(seed)
        k, l = self.agent_count, self.spec.landmark_count
        self._world = CnWorld(
            positions=rng.uniform(ARENA_LOW, ARENA_HIGH, size=(k, 2)),
            velocities=np.zeros((k, 2)),
            landmarks=rng.uniform(ARENA_LOW, ARENA_HIGH, size=(l, 2)),
            radius=self.spec.agent_radius,
        )
        self._done = False
        return [cn_observe(self._world, i) for i in range(k)]

    def step(self, joint: JointAction) -> StepOutcome:
        self._check_joint(joint, self._done)
        self._world = cn_integrate(self._world, joint, self.spec)
        collisions = count_collisions(self._world.positions, self._world.radius)
        reward = cn_reward(self._world.positions, self._world.landmarks, collisions)
        self._done = self._world.clock >= self.horizon
        obs = [cn_observe(self._world, i) for i in range(self.agent_count)]
        return StepOutcome(
            observations=obs,
            rewards=[reward] * self.agent_count,
            done=self._done,
            info={"collisions": collisions},
        )


def _validate(spec: EnvSpec) -> None:
    if spec.landmark_count < 1:
        raise ValueError(f"landmark_count must be >= 1, got {spec.landmark_count}")
    if spec.dt <= 0 or spec.max_speed <= 0 or spec.agent_radius <= 0:
        raise ValueError("dt, max_speed, and agent_radius must be positive")
    if not 0.0 <= spec.damping < 1.0:
        raise ValueError(f"damping must be in [0,1), got {spec.damping}")


register("cn", CooperativeNavigationEnv, _validate)
