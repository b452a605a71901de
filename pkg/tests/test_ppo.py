"""PPO: sampling, GAE, the update step, and bandit learnability."""

import numpy as np
import pytest

from cammarl import nn, ppo
from cammarl.ppo import (
    PpoAgent,
    PpoConfig,
    RolloutBuffer,
    compute_gae,
    normalize_advantages,
    ppo_update,
    sample_action,
)


def hand_gae(rewards, values, dones, bootstrap, gamma, lam):
    """Independent oracle: literal backwards recursion, python floats."""
    t_max = len(rewards)
    adv = [0.0] * t_max
    running = 0.0
    for t in range(t_max - 1, -1, -1):
        next_v = bootstrap if t == t_max - 1 else values[t + 1]
        nonterminal = 1.0 - float(dones[t])
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    rets = [a + v for a, v in zip(adv, values)]
    return np.array(adv), np.array(rets)


class TestSampleAction:
    def test_near_delta_distribution(self):
        agent = PpoAgent(3, 4, PpoConfig(), seed=0)
        for w in agent.actor.weights:
            w[...] = 0.0
        agent.actor.biases[-1][...] = np.array([100.0, 0.0, 0.0, 0.0])
        rng = np.random.default_rng(0)
        draws = [sample_action(agent, np.zeros(3), rng)[0] for _ in range(10_000)]
        assert np.mean(np.asarray(draws) == 0) >= 0.999

    def test_uniform_logits_frequencies(self):
        agent = PpoAgent(3, 5, PpoConfig(), seed=1)
        for w in agent.actor.weights:
            w[...] = 0.0
        rng = np.random.default_rng(1)
        n = 10_000
        draws = np.asarray([sample_action(agent, np.zeros(3), rng)[0] for _ in range(n)])
        expected = n / 5
        sigma = np.sqrt(n * 0.2 * 0.8)
        counts = np.bincount(draws, minlength=5)
        assert np.all(np.abs(counts - expected) <= 3 * sigma)

    def test_deterministic_given_rng(self):
        agent = PpoAgent(4, 3, PpoConfig(), seed=2)
        obs = np.random.default_rng(5).normal(size=4)
        a = sample_action(agent, obs, np.random.default_rng(9))
        b = sample_action(agent, obs, np.random.default_rng(9))
        assert a == b

    def test_dim_mismatch(self):
        agent = PpoAgent(4, 3, PpoConfig(), seed=3)
        with pytest.raises(ValueError):
            sample_action(agent, np.zeros(5), np.random.default_rng(0))

    def test_log_prob_matches_recomputation(self):
        agent = PpoAgent(4, 5, PpoConfig(), seed=4)
        rng = np.random.default_rng(2)
        for _ in range(50):
            obs = rng.normal(size=4)
            action, log_prob, _ = sample_action(agent, obs, rng)
            logits, _ = nn.forward(agent.actor, obs)
            assert abs(log_prob - nn.log_softmax(logits)[action]) < 1e-9


class TestComputeGae:
    def test_all_zero(self):
        adv, rets = compute_gae([0, 0, 0], [0, 0, 0], [0, 0, 1], 0.0, 0.99, 0.95)
        np.testing.assert_array_equal(adv, np.zeros(3))
        np.testing.assert_array_equal(rets, np.zeros(3))

    def test_single_terminal_step(self):
        adv, rets = compute_gae([1.0], [0.0], [True], 0.0, 0.99, 0.95)
        assert adv[0] == 1.0 and rets[0] == 1.0

    def test_two_step_hand_oracle(self):
        rewards, values, dones = [0.0, 1.0], [0.5, 0.2], [False, True]
        adv, rets = compute_gae(rewards, values, dones, 0.0, gamma=0.9, gae_lambda=1.0)
        expected_adv, expected_rets = hand_gae(rewards, values, dones, 0.0, 0.9, 1.0)
        np.testing.assert_allclose(adv, expected_adv, atol=1e-12)
        np.testing.assert_allclose(rets, expected_rets, atol=1e-12)
        # frozen values from the recursion: delta1=0.8, delta0=-0.32
        np.testing.assert_allclose(adv, [0.4, 0.8], atol=1e-12)
        np.testing.assert_allclose(rets, [0.9, 1.0], atol=1e-12)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = int(rng.integers(1, 30))
            rewards = rng.normal(size=t).tolist()
            values = rng.normal(size=t).tolist()
            dones = (rng.uniform(size=t) < 0.2).tolist()
            bootstrap = float(rng.normal())
            adv, rets = compute_gae(rewards, values, dones, bootstrap, 0.97, 0.9)
            e_adv, e_rets = hand_gae(rewards, values, dones, bootstrap, 0.97, 0.9)
            np.testing.assert_allclose(adv, e_adv, atol=1e-10)
            np.testing.assert_allclose(rets, e_rets, atol=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_gae([1.0], [0.0, 0.0], [False], 0.0, 0.99, 0.95)


def _fill_buffer(agent, buffer, rng, reward_fn):
    obs_rng = np.random.default_rng(7)
    while not buffer.full:
        obs = obs_rng.normal(size=agent.obs_dim)
        action, log_prob, value = sample_action(agent, obs, rng)
        buffer.append(obs, action, log_prob, value, reward_fn(action), False)


class TestPpoUpdate:
    def test_advantage_normalization(self):
        rng = np.random.default_rng(0)
        adv = normalize_advantages(rng.normal(loc=3.0, scale=2.0, size=512))
        assert abs(adv.mean()) < 1e-9
        assert abs(adv.std() - 1.0) < 1e-6

    def test_zero_advantages_move_actor_only_through_entropy(self):
        config = PpoConfig(entropy_coef=0.0, epochs=1, minibatch=16)
        agent = PpoAgent(3, 4, config, seed=5)
        buffer = RolloutBuffer(capacity=32)
        rng = np.random.default_rng(1)
        _fill_buffer(agent, buffer, rng, reward_fn=lambda a: 0.0)
        # constant rewards + zero values => identical advantages => normalized to 0
        for i in range(len(buffer.values)):
            buffer.values[i] = 0.0
        before = nn.flatten_parameters(agent.actor)
        ppo_update(agent, buffer, np.random.default_rng(2))
        np.testing.assert_allclose(nn.flatten_parameters(agent.actor), before, atol=1e-12)

        config_ent = PpoConfig(entropy_coef=0.01, epochs=1, minibatch=16)
        agent2 = PpoAgent(3, 4, config_ent, seed=5)
        buffer2 = RolloutBuffer(capacity=32)
        _fill_buffer(agent2, buffer2, np.random.default_rng(1), reward_fn=lambda a: 0.0)
        for i in range(len(buffer2.values)):
            buffer2.values[i] = 0.0
        before2 = nn.flatten_parameters(agent2.actor)
        ppo_update(agent2, buffer2, np.random.default_rng(2))
        assert not np.allclose(nn.flatten_parameters(agent2.actor), before2)

    def test_clip_fraction_in_unit_interval(self):
        agent = PpoAgent(3, 4, PpoConfig(epochs=2, minibatch=16), seed=6)
        buffer = RolloutBuffer(capacity=64)
        rng = np.random.default_rng(3)
        _fill_buffer(agent, buffer, rng, reward_fn=lambda a: float(a == 1))
        stats = ppo_update(agent, buffer, rng)
        assert 0.0 <= stats.clip_fraction <= 1.0

    def test_buffer_cleared_after_update(self):
        agent = PpoAgent(3, 4, PpoConfig(epochs=1, minibatch=16), seed=7)
        buffer = RolloutBuffer(capacity=16)
        _fill_buffer(agent, buffer, np.random.default_rng(4), reward_fn=lambda a: 0.0)
        ppo_update(agent, buffer, np.random.default_rng(5))
        assert len(buffer) == 0

    def test_empty_buffer_rejected(self):
        agent = PpoAgent(3, 4, PpoConfig(), seed=8)
        with pytest.raises(ValueError):
            ppo_update(agent, RolloutBuffer(capacity=8), np.random.default_rng(0))

    def test_deterministic(self):
        def run():
            agent = PpoAgent(3, 4, PpoConfig(epochs=2, minibatch=16), seed=9)
            buffer = RolloutBuffer(capacity=32)
            _fill_buffer(agent, buffer, np.random.default_rng(6), reward_fn=lambda a: float(a))
            ppo_update(agent, buffer, np.random.default_rng(7))
            return nn.flatten_parameters(agent.actor)

        np.testing.assert_array_equal(run(), run())


class TestPolicyGradient:
    def test_logit_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        n, k = 12, 5
        logits = rng.normal(size=(n, k))
        actions = rng.integers(0, k, n)
        old_log_probs = nn.log_softmax(logits)[np.arange(n), actions] + rng.normal(
            scale=0.1, size=n)
        advantages = rng.normal(size=n)

        def loss_at(z):
            logp = nn.log_softmax(z)
            probs = np.exp(logp)
            ratio = np.exp(logp[np.arange(n), actions] - old_log_probs)
            unclipped = ratio * advantages
            clipped = np.clip(ratio, 0.8, 1.2) * advantages
            policy = -np.minimum(unclipped, clipped).mean()
            entropy = -(probs * logp).sum(axis=1).mean()
            return policy - 0.01 * entropy

        grad, _, _, _ = ppo._policy_logit_grad(logits, actions, old_log_probs,
                                               advantages, clip=0.2, entropy_coef=0.01)
        h = 1e-6
        for _ in range(40):
            i, j = rng.integers(0, n), rng.integers(0, k)
            bumped_up, bumped_dn = logits.copy(), logits.copy()
            bumped_up[i, j] += h
            bumped_dn[i, j] -= h
            numeric = (loss_at(bumped_up) - loss_at(bumped_dn)) / (2 * h)
            assert abs(grad[i, j] - numeric) < 1e-6


class TestBanditLearnability:
    def test_two_armed_bandit(self):
        # reward 1 for arm 0, 0 for arm 1; stateless episodes of length 1
        config = PpoConfig(lr=1e-3, epochs=4, minibatch=32, entropy_coef=0.01)
        agent = PpoAgent(1, 2, config, seed=10)
        rng = np.random.default_rng(8)
        obs = np.zeros(1)
        solved_at = None
        for update in range(200):
            buffer = RolloutBuffer(capacity=64)
            while not buffer.full:
                action, log_prob, value = sample_action(agent, obs, rng)
                buffer.append(obs, action, log_prob, value, float(action == 0), True)
            ppo_update(agent, buffer, rng)
            if agent.policy_probs(obs)[0] > 0.9:
                solved_at = update
                break
        assert solved_at is not None, "bandit not solved within 200 updates"
