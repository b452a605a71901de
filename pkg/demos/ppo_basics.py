"""Walkthrough: the PPO learner on a two-armed bandit and single-agent navigation.

The bandit shows the policy committing to the rewarding arm within a few
dozen updates; the navigation run shows returns improving as one agent
learns to reach a landmark.

Run:  python demos/ppo_basics.py
"""

import numpy as np

from cammarl.envs import EnvSpec
from cammarl.modes import ModelingMode
from cammarl.ppo import PpoAgent, PpoConfig, RolloutBuffer, ppo_update, sample_action
from cammarl.training import TrainSettings, train


def bandit():
    print("== two-armed bandit ==")
    agent = PpoAgent(1, 2, PpoConfig(lr=1e-3, epochs=4, minibatch=32), seed=0)
    rng = np.random.default_rng(0)
    obs = np.zeros(1)
    for update in range(200):
        buffer = RolloutBuffer(capacity=64)
        while not buffer.full:
            action, log_prob, value = sample_action(agent, obs, rng)
            buffer.append(obs, action, log_prob, value, float(action == 0), True)
        stats = ppo_update(agent, buffer, rng)
        p_best = agent.policy_probs(obs)[0]
        if update % 20 == 0:
            print(f"update {update:>3}: P(best arm)={p_best:.3f} entropy={stats.entropy:.3f}")
        if p_best > 0.9:
            print(f"committed to the best arm after {update + 1} updates")
            return
    print("did not commit within 200 updates")


def navigation():
    print("\n== single-agent navigation ==")
    settings = TrainSettings(
        env_spec=EnvSpec("cn", agent_count=1, landmark_count=1, horizon=25),
        mode=ModelingMode.parse("noam"),
        episodes=400,
        update_interval=500,
        ppo=PpoConfig(lr=2e-3, epochs=16, minibatch=64, entropy_coef=0.005, gamma=0.9),
        record_first_episode=False,
    )
    artifacts = train(settings, seed=1)
    returns = artifacts.episode_returns[:, 0]
    for lo in range(0, 400, 100):
        print(f"episodes {lo:>3}-{lo + 99}: mean return {returns[lo:lo + 100].mean():.2f}")


if __name__ == "__main__":
    bandit()
    navigation()
