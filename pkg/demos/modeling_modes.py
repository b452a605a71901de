"""Walkthrough: what each modeling mode feeds the self agent.

Builds one navigation state and prints the augmented observation block per
mode, then runs a short two-agent training loop with conformal action sets
and shows the set-size and accuracy series produced along the way.

Run:  python demos/modeling_modes.py
"""

import numpy as np

from cammarl.conformal import ConformalModel
from cammarl.envs import EnvSpec, make_env
from cammarl.modes import (
    VALID_MODE_NAMES,
    ModelingMode,
    OtherAgentInfo,
    augment_observation,
    augmented_dim,
)
from cammarl.ppo import PpoConfig
from cammarl.training import ConformalTrainConfig, TrainSettings, train


def show_blocks():
    print("== augmentation blocks on one state ==")
    env = make_env(EnvSpec("cn", agent_count=2, landmark_count=2))
    observations = env.reset(3)
    o_self, o_other = observations[0].values, observations[1].values
    model = ConformalModel(env.observation_dim(1), env.action_count(1), alpha=0.1, seed=0)
    model.tau, model.lam, model.k_reg = 0.9, 0.01, 1
    counts = {0: env.action_count(0), 1: env.action_count(1)}
    for name in VALID_MODE_NAMES:
        mode = ModelingMode.parse(name)
        infos = [OtherAgentInfo(1, o_other, action=2)]
        augmented = augment_observation(mode, o_self, infos, {1: model},
                                        np.random.default_rng(0), counts)
        block = np.round(augmented[len(o_self):], 3)
        width = augmented_dim(mode, env)
        shown = block if block.size <= 8 else f"[{block[0]} ... {block[-1]}] ({block.size} values)"
        print(f"{name:<22} dim {width:>3}  block {shown}")


def short_training_run():
    print("\n== two-agent run with conformal action sets ==")
    settings = TrainSettings(
        env_spec=EnvSpec("cn", agent_count=2, landmark_count=2, horizon=25),
        mode=ModelingMode.parse("cammarl-binary"),
        episodes=600,
        update_interval=512,
        ppo=PpoConfig(lr=2e-3, epochs=8, minibatch=64, entropy_coef=0.003, gamma=0.9),
        conformal=ConformalTrainConfig(classifier_epochs=4, classifier_minibatch=256,
                                       buffer_capacity=10_000, eval_sample=512),
        record_first_episode=False,
    )
    artifacts = train(settings, seed=0)
    returns = artifacts.episode_returns.mean(axis=1)
    print(f"team return: first 100 episodes {returns[:100].mean():.1f}, "
          f"last 100 episodes {returns[-100:].mean():.1f}")
    print(f"{'update':>6} {'set size':>9} {'coverage':>9} {'accuracy':>9} {'lambda':>7} {'k_reg':>5}")
    for i, row in enumerate(artifacts.conformal_series[1]):
        print(f"{i:>6} {row.mean_set_size:>9.2f} {row.empirical_coverage:>9.3f} "
              f"{row.classifier_accuracy:>9.3f} {row.lam:>7} {row.k_reg:>5}")


if __name__ == "__main__":
    show_blocks()
    short_training_run()
