"""Independent PPO actor-critic learners.

Each agent owns separate actor and critic networks and a rollout buffer
sized to the update interval.  Updates maximize the clipped surrogate with
an entropy bonus and a squared-error value loss; advantages come from GAE
and are normalized once per update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cammarl import nn


@dataclass
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    lr: float = 3e-4
    epochs: int = 4
    minibatch: int = 64
    entropy_coef: float = 0.01
    value_coef: float = 0.5

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0,1), got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0,1], got {self.gae_lambda}")
        if self.clip <= 0 or self.lr <= 0 or self.epochs < 1 or self.minibatch < 1:
            raise ValueError("clip, lr, epochs, and minibatch must be positive")


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


class RolloutBuffer:
    """Append-only per-agent store, cleared after each update."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.clear()

    def clear(self) -> None:
        self.observations: list[np.ndarray] = []
        self.actions: list[int] = []
        self.log_probs: list[float] = []
        self.values: list[float] = []
        self.rewards: list[float] = []
        self.dones: list[bool] = []

    def append(self, obs, action, log_prob, value, reward, done) -> None:
        self.observations.append(np.asarray(obs, dtype=np.float64))
        self.actions.append(int(action))
        self.log_probs.append(float(log_prob))
        self.values.append(float(value))
        self.rewards.append(float(reward))
        self.dones.append(bool(done))

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def full(self) -> bool:
        return len(self) >= self.capacity


class PpoAgent:
    def __init__(self, obs_dim: int, action_count: int, config: PpoConfig, seed,
                 hidden: int = nn.HIDDEN_SIZE):
        config.validate()
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.obs_dim = obs_dim
        self.action_count = action_count
        self.config = config
        self.actor = nn.mlp_init((obs_dim, hidden, hidden, action_count), "tanh", rng)
        self.critic = nn.mlp_init((obs_dim, hidden, hidden, 1), "tanh", rng)

    def policy_probs(self, obs: np.ndarray) -> np.ndarray:
        logits, _ = nn.forward(self.actor, obs)
        return nn.softmax(logits)

    def value(self, obs: np.ndarray) -> float:
        out, _ = nn.forward(self.critic, obs)
        return float(out[0])


def sample_action(agent: PpoAgent, obs: np.ndarray, rng: np.random.Generator) -> tuple[int, float, float]:
    """Draw action ~ categorical(softmax(logits)); return (action, log_prob, value)."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[0] != agent.obs_dim:
        raise ValueError(f"observation has {obs.shape[0]} features, actor expects {agent.obs_dim}")
    logits, _ = nn.forward(agent.actor, obs)
    logp = nn.log_softmax(logits)
    probs = np.exp(logp)
    action = int(rng.choice(agent.action_count, p=probs / probs.sum()))
    return action, float(logp[action]), agent.value(obs)


def compute_gae(rewards, values, dones, bootstrap_value: float, gamma: float,
                gae_lambda: float) -> tuple[np.ndarray, np.ndarray]:
    """delta_t = r_t + gamma V_{t+1} (1-done_t) - V_t, discounted-sum backwards."""
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    if not (r.shape == v.shape == d.shape):
        raise ValueError("rewards, values, and dones must have equal length")
    t_max = r.shape[0]
    advantages = np.zeros(t_max)
    last = 0.0
    next_value = float(bootstrap_value)
    for t in range(t_max - 1, -1, -1):
        nonterminal = 1.0 - d[t]
        delta = r[t] + gamma * next_value * nonterminal - v[t]
        last = delta + gamma * gae_lambda * nonterminal * last
        advantages[t] = last
        next_value = v[t]
    return advantages, advantages + v


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    a = np.asarray(advantages, dtype=np.float64)
    return (a - a.mean()) / (a.std() + 1e-8)


def _policy_logit_grad(logits: np.ndarray, actions: np.ndarray, old_log_probs: np.ndarray,
                       advantages: np.ndarray, clip: float, entropy_coef: float,
                       ) -> tuple[np.ndarray, float, float, float]:
    """Gradient of the minibatch PPO policy loss w.r.t. the logits.

    Loss = -mean(min(ratio A, clip(ratio) A)) - entropy_coef * mean(entropy).
    Returns (grad, policy_loss, entropy, clip_fraction).
    """
    n = logits.shape[0]
    logp = nn.log_softmax(logits)
    probs = np.exp(logp)
    idx = np.arange(n)
    logp_a = logp[idx, actions]
    ratio = np.exp(logp_a - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = float(-surrogate.mean())
    clip_fraction = float((np.abs(ratio - 1.0) > clip).mean())

    # d surrogate / d logp_a flows only through the active unclipped branch
    active = (unclipped <= clipped).astype(np.float64)
    d_logp_a = -(active * ratio * advantages) / n
    one_hot = np.zeros_like(logits)
    one_hot[idx, actions] = 1.0
    grad = d_logp_a[:, None] * (one_hot - probs)

    entropy = -(probs * logp).sum(axis=1)
    # d(-mean entropy)/d logits = probs * (logp + entropy) / n
    grad += entropy_coef * probs * (logp + entropy[:, None]) / n
    return grad, policy_loss, float(entropy.mean()), clip_fraction


def ppo_update(agent: PpoAgent, buffer: RolloutBuffer, rng: np.random.Generator,
               bootstrap_value: float = 0.0) -> UpdateStats:
    """One PPO update over the buffer; clears the buffer when done."""
    if len(buffer) == 0:
        raise ValueError("empty rollout buffer")
    cfg = agent.config
    obs = np.stack(buffer.observations)
    actions = np.asarray(buffer.actions, dtype=np.intp)
    old_log_probs = np.asarray(buffer.log_probs)
    advantages, returns = compute_gae(buffer.rewards, buffer.values, buffer.dones,
                                      bootstrap_value, cfg.gamma, cfg.gae_lambda)
    advantages = normalize_advantages(advantages)

    n = obs.shape[0]
    stats = np.zeros(4)
    batches = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            mb = perm[start : start + cfg.minibatch]
            logits, actor_cache = nn.forward(agent.actor, obs[mb])
            grad, policy_loss, entropy, clip_frac = _policy_logit_grad(
                logits, actions[mb], old_log_probs[mb], advantages[mb],
                cfg.clip, cfg.entropy_coef)
            nn.adam_step(agent.actor, nn.backward(agent.actor, actor_cache, grad), cfg.lr)

            values, critic_cache = nn.forward(agent.critic, obs[mb])
            err = values[:, 0] - returns[mb]
            value_loss = float((err**2).mean())
            v_grad = (cfg.value_coef * 2.0 * err / mb.size)[:, None]
            nn.adam_step(agent.critic, nn.backward(agent.critic, critic_cache, v_grad), cfg.lr)

            stats += (policy_loss, value_loss, entropy, clip_frac)
            batches += 1
    buffer.clear()
    means = stats / batches
    return UpdateStats(policy_loss=float(means[0]), value_loss=float(means[1]),
                       entropy=float(means[2]), clip_fraction=float(means[3]))
