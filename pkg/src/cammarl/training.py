"""Full multi-agent training loop.

Agent 0 learns on mode-augmented observations; agents 1..K-1 learn on their
raw observations in every mode.  Within a timestep the other agents sample
first, so privileged modes can expose their current actions; all actions
are then applied jointly.  Modes that carry a classifier collect one
(observation, action) pair per other agent per step.

Every ``update_interval`` environment steps the conformal models retrain
and recalibrate, then every agent runs a PPO update.  Bootstrap values for
truncated rollouts are computed before any network changes.  Everything is
deterministic given (config, seed) through the named-substream rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cammarl import conformal, nn, ppo, rng as rngmod
from cammarl.envs import trajectory
from cammarl.envs.core import Environment, EnvSpec, JointAction, make_env
from cammarl.modes import ModelingMode, OtherAgentInfo, augment_observation, augmented_dim


@dataclass
class ConformalTrainConfig:
    classifier_epochs: int = 3
    classifier_minibatch: int = 256
    classifier_lr: float = 1e-3
    buffer_capacity: int = conformal.DEFAULT_BUFFER_CAPACITY
    train_fraction: float = conformal.DEFAULT_TRAIN_FRACTION
    eval_sample: int = 2048


@dataclass
class TrainSettings:
    """Everything train() needs beyond the environment spec."""

    env_spec: EnvSpec
    mode: ModelingMode
    episodes: int
    alpha: float = 0.1
    lambda_grid: tuple[float, ...] = conformal.DEFAULT_LAMBDA_GRID
    update_interval: int = 2048
    ppo: ppo.PpoConfig = field(default_factory=ppo.PpoConfig)
    conformal: ConformalTrainConfig = field(default_factory=ConformalTrainConfig)
    record_first_episode: bool = True


@dataclass
class EpisodeRecord:
    """Diagnostics from one episode (used by tests and trajectory dumps)."""

    returns: np.ndarray
    steps: int
    raw_observations: list[list[np.ndarray]]  # per step, per agent
    self_inputs: list[np.ndarray]             # agent 0's augmented actor inputs
    step_records: list[dict]


@dataclass
class TrainRunArtifacts:
    seed: int
    mode: str
    episode_returns: np.ndarray               # (episodes, K)
    conformal_series: dict[int, list[conformal.ConformalUpdateStats]]
    ppo_series: dict[int, list[ppo.UpdateStats]]
    actor_checkpoints: dict[int, dict]
    critic_checkpoints: dict[int, dict]
    classifier_checkpoints: dict[int, dict]
    first_episode: EpisodeRecord | None
    episode_infos: list[dict]


class Trainer:
    """Owns the networks, buffers, and update cadence for one run."""

    def __init__(self, settings: TrainSettings, seed: int):
        self.settings = settings
        self.seed = int(seed)
        self.env: Environment = make_env(settings.env_spec)
        k = self.env.agent_count
        self.mode = settings.mode
        init = rngmod.stream(self.seed, rngmod.INIT)
        self.agents: list[ppo.PpoAgent] = []
        for i in range(k):
            obs_dim = augmented_dim(self.mode, self.env) if i == 0 else self.env.observation_dim(i)
            self.agents.append(ppo.PpoAgent(obs_dim, self.env.action_count(i), settings.ppo, init))
        self.models: dict[int, conformal.ConformalModel] = {}
        self.model_buffers: dict[int, conformal.LabeledObsBuffer] = {}
        if self.mode.carries_model:
            for j in range(1, k):
                self.models[j] = conformal.ConformalModel(
                    self.env.observation_dim(j), self.env.action_count(j),
                    settings.alpha, init)
                self.model_buffers[j] = conformal.LabeledObsBuffer(
                    self.env.observation_dim(j),
                    capacity=settings.conformal.buffer_capacity,
                    train_fraction=settings.conformal.train_fraction)
        self.buffers = [ppo.RolloutBuffer(settings.update_interval) for _ in range(k)]
        self.train_rng = rngmod.stream(self.seed, rngmod.TRAINING)
        self.global_step = 0
        self.conformal_series: dict[int, list[conformal.ConformalUpdateStats]] = {
            j: [] for j in self.models}
        self.ppo_series: dict[int, list[ppo.UpdateStats]] = {i: [] for i in range(k)}
        self.action_counts = {i: self.env.action_count(i) for i in range(k)}

    def _self_input(self, observations, u_rng, actions=None) -> np.ndarray:
        others = [
            OtherAgentInfo(agent_id=j, observation=observations[j].values,
                           action=None if actions is None else actions[j])
            for j in range(1, self.env.agent_count)
        ]
        return augment_observation(self.mode, observations[0].values, others,
                                   self.models, u_rng, self.action_counts)

    def _maybe_update(self, next_observations, next_done: bool, u_rng, last_actions) -> None:
        if self.global_step % self.settings.update_interval != 0:
            return
        k = self.env.agent_count
        # Bootstrap values with the pre-update networks and models.  Modes
        # needing true actions get the most recent joint action as a stale
        # stand-in; it only shapes the truncation bootstrap, never training data.
        bootstraps = [0.0] * k
        if not next_done:
            actions = last_actions if self.mode.needs_true_action else None
            for i in range(k):
                obs = (self._self_input(next_observations, u_rng, actions=actions)
                       if i == 0 else next_observations[i].values)
                bootstraps[i] = self.agents[i].value(obs)
        for j in sorted(self.models):
            buf = self.model_buffers[j]
            if len(buf) < 10:
                continue
            cfg = self.settings.conformal
            stats = conformal.update_model(
                self.models[j], buf, self.train_rng,
                epochs=cfg.classifier_epochs, minibatch=cfg.classifier_minibatch,
                lr=cfg.classifier_lr, lambda_grid=self.settings.lambda_grid,
                eval_sample=cfg.eval_sample)
            self.conformal_series[j].append(stats)
        for i in range(k):
            stats = ppo.ppo_update(self.agents[i], self.buffers[i], self.train_rng,
                                   bootstrap_value=bootstraps[i])
            self.ppo_series[i].append(stats)

    def run_episode(self, episode_index: int, record: bool = False) -> EpisodeRecord:
        k = self.env.agent_count
        placement_seed, policy_rng, u_rng = rngmod.episode_streams(self.seed, episode_index)
        observations = self.env.reset(placement_seed)
        returns = np.zeros(k)
        raw_obs_log: list[list[np.ndarray]] = []
        self_input_log: list[np.ndarray] = []
        step_records: list[dict] = []
        done = False
        t = 0
        while not done:
            actions = [0] * k
            log_probs = [0.0] * k
            values = [0.0] * k
            # Other agents act on their own observations first.
            for j in range(1, k):
                actions[j], log_probs[j], values[j] = ppo.sample_action(
                    self.agents[j], observations[j].values, policy_rng)
            self_input = self._self_input(
                observations, u_rng,
                actions=actions if self.mode.needs_true_action else None)
            actions[0], log_probs[0], values[0] = ppo.sample_action(
                self.agents[0], self_input, policy_rng)

            joint = JointAction(tuple(actions))
            outcome = self.env.step(joint)
            for j, model_buf in self.model_buffers.items():
                model_buf.append(observations[j].values, actions[j])
            self.buffers[0].append(self_input, actions[0], log_probs[0], values[0],
                                   outcome.rewards[0], outcome.done)
            for j in range(1, k):
                self.buffers[j].append(observations[j].values, actions[j], log_probs[j],
                                       values[j], outcome.rewards[j], outcome.done)
            if record:
                raw_obs_log.append([o.values.copy() for o in observations])
                self_input_log.append(self_input.copy())
                step_records.append(trajectory.step_record(t, joint, outcome))
            returns += np.asarray(outcome.rewards)
            done = outcome.done
            self.global_step += 1
            t += 1
            self._maybe_update(outcome.observations, done, u_rng, actions)
            observations = outcome.observations
        return EpisodeRecord(returns=returns, steps=t, raw_observations=raw_obs_log,
                             self_inputs=self_input_log, step_records=step_records)

    def checkpoints(self) -> tuple[dict[int, dict], dict[int, dict], dict[int, dict]]:
        actors = {i: nn.to_checkpoint(a.actor) for i, a in enumerate(self.agents)}
        critics = {i: nn.to_checkpoint(a.critic) for i, a in enumerate(self.agents)}
        classifiers = {j: nn.to_checkpoint(m.classifier) for j, m in self.models.items()}
        return actors, critics, classifiers


def train(settings: TrainSettings, seed: int) -> TrainRunArtifacts:
    """Run the whole training loop for one seed."""
    trainer = Trainer(settings, seed)
    k = trainer.env.agent_count
    episode_returns = np.zeros((settings.episodes, k))
    episode_infos: list[dict] = []
    first: EpisodeRecord | None = None
    for ep in range(settings.episodes):
        record = settings.record_first_episode and ep == 0
        result = trainer.run_episode(ep, record=record)
        episode_returns[ep] = result.returns
        episode_infos.append({"episode": ep, "steps": result.steps})
        if record:
            first = result
    actors, critics, classifiers = trainer.checkpoints()
    return TrainRunArtifacts(
        seed=seed,
        mode=settings.mode.name,
        episode_returns=episode_returns,
        conformal_series=trainer.conformal_series,
        ppo_series=trainer.ppo_series,
        actor_checkpoints=actors,
        critic_checkpoints=critics,
        classifier_checkpoints=classifiers,
        first_episode=first,
        episode_infos=episode_infos,
    )
