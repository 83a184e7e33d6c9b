"""Learner tests: GAE, Gaussian sampling, clipped-objective behavior,
gradient correctness versus finite differences, a from-scratch scalar
oracle for the full update, determinism, and checkpoint resume."""

import math

import numpy as np
import pytest
from conftest import SlideEnv, fd_gradient

from latticeworm import ppo
from latticeworm.ppo import (
    PPOLearner,
    TrainConfig,
    compute_gae,
    gaussian_log_prob,
    load_checkpoint,
    save_checkpoint,
    train,
)


def small_learner(obs_dim=3, n_actions=2, hidden=(6, 5), seed=0, **overrides):
    config = TrainConfig(seed=seed, hidden=hidden, **overrides)
    return PPOLearner(obs_dim, n_actions, config)


class TestTrainConfig:
    def test_defaults_are_valid(self):
        TrainConfig()

    @pytest.mark.parametrize(
        "bad",
        [
            {"discount_gamma": 0.0},
            {"discount_gamma": 1.1},
            {"gae_lambda": -0.1},
            {"gae_lambda": 1.5},
            {"clip_range": 0.0},
            {"n_steps": 0},
            {"learning_rate": 0.0},
            {"total_episodes": -1},
        ],
    )
    def test_out_of_range_values_rejected(self, bad):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


class TestGaussianLogProb:
    def test_log_prob_at_the_mean_is_normalization_constant(self):
        std = np.array([0.5, 2.0, 1.0])
        mean = np.array([0.1, -0.3, 4.0])
        lp = gaussian_log_prob(mean, mean, std)
        expected = np.sum(-np.log(std * np.sqrt(2.0 * np.pi)))
        assert lp == pytest.approx(expected, rel=1e-12)

    def test_matches_scalar_density(self):
        lp = gaussian_log_prob(np.array([1.3]), np.array([0.4]), np.array([0.7]))
        z = (1.3 - 0.4) / 0.7
        expected = -0.5 * z * z - math.log(0.7 * math.sqrt(2.0 * math.pi))
        assert lp == pytest.approx(expected, rel=1e-12)

    def test_batched_rows_are_independent(self):
        mean = np.array([[0.0, 0.0], [1.0, -1.0]])
        actions = np.array([[0.5, 0.5], [1.0, -1.0]])
        std = np.array([1.0, 2.0])
        lp = gaussian_log_prob(actions, mean, std)
        assert lp.shape == (2,)
        assert lp[0] == pytest.approx(float(gaussian_log_prob(actions[0], mean[0], std)))
        assert lp[1] == pytest.approx(float(gaussian_log_prob(actions[1], mean[1], std)))


class TestSampleAction:
    def test_tiny_std_returns_the_mean(self):
        learner = small_learner()
        learner.log_std[:] = -40.0  # clamps to exp(-20)
        mean = np.array([0.3, -0.2])
        action, _ = learner.sample_action(mean, learner.std())
        np.testing.assert_allclose(action, mean, atol=1e-7)

    def test_same_seed_reproduces_sample(self):
        a = small_learner(seed=5)
        b = small_learner(seed=5)
        mean = np.array([0.1, 0.2])
        sa, lpa = a.sample_action(mean, a.std())
        sb, lpb = b.sample_action(mean, b.std())
        np.testing.assert_array_equal(sa, sb)
        assert lpa == lpb

    def test_log_prob_recorded_on_raw_sample(self):
        learner = small_learner()
        mean = np.array([0.0, 0.0])
        action, lp = learner.sample_action(mean, learner.std())
        assert lp == pytest.approx(
            float(gaussian_log_prob(action, mean, learner.std())), rel=1e-12
        )


class TestPolicyForward:
    def test_zero_parameters_give_zero_mean_and_value(self):
        learner = small_learner()
        for w in [*learner.policy.weights, *learner.value.weights]:
            w[:] = 0.0
        mean, std, value = learner.policy_forward(np.ones((2, 3)))
        np.testing.assert_array_equal(mean, np.zeros((2, 2)))
        np.testing.assert_array_equal(value, np.zeros(2))
        np.testing.assert_array_equal(std, np.ones(2))

    def test_identical_observations_identical_outputs(self):
        learner = small_learner()
        obs = np.random.default_rng(0).standard_normal(3)
        m1, s1, v1 = learner.policy_forward(obs)
        m2, s2, v2 = learner.policy_forward(obs)
        np.testing.assert_array_equal(m1, m2)
        np.testing.assert_array_equal(v1, v2)

    def test_log_std_clamped_to_range(self):
        learner = small_learner()
        learner.log_std[:] = [5.0, -100.0]
        std = learner.std()
        np.testing.assert_allclose(std, [np.exp(2.0), np.exp(-20.0)], rtol=1e-12)


class TestComputeGAE:
    def test_single_done_transition(self):
        adv, ret = compute_gae([1.0], [0.0], [1.0], 99.0, 0.99, 0.95)
        np.testing.assert_allclose(adv, [1.0])
        np.testing.assert_allclose(ret, [1.0])

    def test_two_step_undiscounted_hand_computed(self):
        adv, ret = compute_gae([0.0, 1.0], [0.0, 0.0], [0.0, 0.0], 0.0, 1.0, 1.0)
        np.testing.assert_allclose(adv, [1.0, 1.0])
        np.testing.assert_allclose(ret, [1.0, 1.0])

    def test_exact_value_function_gives_zero_advantages(self):
        # constant reward c, V = c/(1-gamma) everywhere: every delta telescopes
        c, gamma = 0.7, 0.9
        v = c / (1.0 - gamma)
        adv, ret = compute_gae([c] * 6, [v] * 6, [0.0] * 6, v, gamma, 0.95)
        np.testing.assert_allclose(adv, np.zeros(6), atol=1e-14)
        np.testing.assert_allclose(ret, np.full(6, v), rtol=1e-14)

    def test_lambda_zero_degenerates_to_td_residuals(self):
        rng = np.random.default_rng(0)
        rewards = rng.standard_normal(8)
        values = rng.standard_normal(8)
        dones = (rng.random(8) < 0.3).astype(float)
        bootstrap = float(rng.standard_normal())
        gamma = 0.97
        adv, _ = compute_gae(rewards, values, dones, bootstrap, gamma, 0.0)
        next_values = np.append(values[1:], bootstrap)
        td = rewards + gamma * next_values * (1.0 - dones) - values
        np.testing.assert_allclose(adv, td, rtol=1e-12)

    def test_lambda_one_gamma_one_is_monte_carlo(self):
        rng = np.random.default_rng(1)
        rewards = rng.standard_normal(10)
        values = rng.standard_normal(10)
        adv, ret = compute_gae(rewards, values, np.zeros(10), 0.0, 1.0, 1.0)
        mc = np.cumsum(rewards[::-1])[::-1]
        np.testing.assert_allclose(adv, mc - values, rtol=1e-12)
        np.testing.assert_allclose(ret, mc, rtol=1e-12)

    def test_done_blocks_credit_flow(self):
        adv, _ = compute_gae([0.0, 5.0], [0.0, 0.0], [1.0, 1.0], 0.0, 0.99, 0.95)
        # episode boundary after step 0: the big step-1 reward cannot leak back
        np.testing.assert_allclose(adv, [0.0, 5.0])


class TestClippedObjective:
    def _one_transition_update(self, learner, advantage, log_ratio):
        """Run one minibatch whose single transition has a chosen ratio."""
        obs = np.array([[0.4, -0.2, 0.1]])
        mean = learner.policy.forward(obs)
        action = mean + 0.1  # arbitrary fixed offset from the mean
        new_lp = float(gaussian_log_prob(action[0], mean[0], learner.std()))
        old_lp = np.array([new_lp - log_ratio])
        return learner._minibatch_step(
            obs, action, old_lp, np.array([advantage]), np.array([0.3])
        )

    def test_identity_ratio_loss_is_negative_advantage(self):
        learner = small_learner()
        value_before = [w.copy() for w in learner.value.weights]
        stats = self._one_transition_update(learner, advantage=1.7, log_ratio=0.0)
        assert stats["policy_loss"] == pytest.approx(-1.7, rel=1e-12)
        assert stats["clip_fraction"] == 0.0
        # value loss still moves the value net
        moved = any(
            not np.array_equal(b, w)
            for b, w in zip(value_before, learner.value.weights)
        )
        assert moved

    def test_positive_advantage_beyond_clip_freezes_policy(self):
        learner = small_learner()
        policy_before = [p.copy() for p in learner.policy.params]
        log_std_before = learner.log_std.copy()
        eps = learner.config.clip_range
        stats = self._one_transition_update(
            learner, advantage=2.0, log_ratio=math.log(1.0 + 2.0 * eps)
        )
        # clipped branch selected: loss pinned at -(1+eps)*A, no policy motion
        assert stats["policy_loss"] == pytest.approx(-(1.0 + eps) * 2.0, rel=1e-9)
        assert stats["clip_fraction"] == 1.0
        for before, after in zip(policy_before, learner.policy.params):
            np.testing.assert_array_equal(before, after)
        np.testing.assert_array_equal(log_std_before, learner.log_std)

    def test_negative_advantage_below_clip_freezes_policy(self):
        learner = small_learner()
        policy_before = [p.copy() for p in learner.policy.params]
        eps = learner.config.clip_range
        stats = self._one_transition_update(
            learner, advantage=-1.0, log_ratio=math.log(1.0 - 2.0 * eps)
        )
        assert stats["policy_loss"] == pytest.approx(1.0 - eps, rel=1e-9)
        assert stats["clip_fraction"] == 1.0
        for before, after in zip(policy_before, learner.policy.params):
            np.testing.assert_array_equal(before, after)

    def test_approx_kl_positive_when_ratio_moves(self):
        learner = small_learner()
        stats = self._one_transition_update(learner, advantage=0.5, log_ratio=0.1)
        assert stats["approx_kl"] > 0.0


class TestGradientsMatchFiniteDifferences:
    def test_full_loss_gradient_within_tolerance(self):
        learner = small_learner(obs_dim=5, n_actions=3, hidden=(6, 5), seed=2)
        rng = np.random.default_rng(3)
        n = 4
        obs = rng.standard_normal((n, 5))
        mean = learner.policy.forward(obs)
        actions = mean + 0.3 * rng.standard_normal((n, 3))
        base_lp = gaussian_log_prob(actions, mean, learner.std())
        # keep every ratio well inside the clip interval so the loss is smooth
        old_lp = base_lp + rng.uniform(-0.05, 0.05, size=n)
        advantages = rng.standard_normal(n)
        returns = rng.standard_normal(n)

        def loss():
            return learner._loss_and_grads(obs, actions, old_lp, advantages, returns)[0]

        _, analytic, _ = learner._loss_and_grads(obs, actions, old_lp, advantages, returns)
        numeric = fd_gradient(loss, learner._param_list)
        assert len(analytic) == len(numeric)
        for a, n_grad in zip(analytic, numeric):
            np.testing.assert_allclose(a, n_grad, rtol=1e-4, atol=1e-8)

    def test_gradient_zero_beyond_clip_matches_fd(self):
        learner = small_learner(obs_dim=2, n_actions=1, hidden=(4,), seed=4)
        obs = np.array([[0.5, -1.0]])
        mean = learner.policy.forward(obs)
        actions = mean + 0.2
        lp = gaussian_log_prob(actions, mean, learner.std())
        old_lp = lp - math.log(1.5)  # ratio 1.5, far beyond 1 + eps
        advantages = np.array([1.0])
        returns = np.array([0.0])

        def loss():
            return learner._loss_and_grads(obs, actions, old_lp, advantages, returns)[0]

        _, analytic, _ = learner._loss_and_grads(obs, actions, old_lp, advantages, returns)
        numeric = fd_gradient(loss, learner.policy.params + [learner.log_std])
        for a, n_grad in zip(analytic[: len(numeric)], numeric):
            np.testing.assert_allclose(a, np.zeros_like(a), atol=1e-15)
            np.testing.assert_allclose(n_grad, np.zeros_like(n_grad), atol=1e-9)


class ScalarOracle:
    """From-scratch reimplementation of one update with python floats.

    Single hidden layer of two units, one action dimension, batch of two.
    Written against the update rule definition, sharing no code with the
    learner; agreement to 1e-10 pins the whole pipeline.
    """

    LOG_2PI = math.log(2.0 * math.pi)

    def __init__(self, learner):
        c = learner.config
        self.clip = c.clip_range
        self.value_coef = c.value_coef
        self.entropy_coef = c.entropy_coef
        self.lr = c.learning_rate
        self.max_norm = c.max_grad_norm
        self.n_epochs = c.n_epochs
        grab = lambda a: [[float(v) for v in row] for row in np.atleast_2d(a)]
        self.pw1 = grab(learner.policy.weights[0])
        self.pw2 = grab(learner.policy.weights[1])
        self.pb1 = [float(v) for v in learner.policy.biases[0]]
        self.pb2 = [float(v) for v in learner.policy.biases[1]]
        self.ls = float(learner.log_std[0])
        self.vw1 = grab(learner.value.weights[0])
        self.vw2 = grab(learner.value.weights[1])
        self.vb1 = [float(v) for v in learner.value.biases[0]]
        self.vb2 = [float(v) for v in learner.value.biases[1]]
        self.params = [self.pw1, self.pw2, self.pb1, self.pb2, "ls", self.vw1,
                       self.vw2, self.vb1, self.vb2]
        self.adam_m = [self._zeros_like(p) for p in self.params]
        self.adam_v = [self._zeros_like(p) for p in self.params]
        self.adam_t = 0

    def _zeros_like(self, p):
        if p == "ls":
            return [0.0]
        if isinstance(p[0], list):
            return [[0.0] * len(row) for row in p]
        return [0.0] * len(p)

    @staticmethod
    def _net(x, w1, b1, w2, b2):
        """Forward one observation; returns (hidden activations, output)."""
        h = [math.tanh(sum(w1[j][k] * x[j] for j in range(len(x))) + b1[k])
             for k in range(len(b1))]
        out = sum(w2[k][0] * h[k] for k in range(len(h))) + b2[0]
        return h, out

    def update(self, obs, actions, old_lps, advantages, returns):
        n = len(returns)
        mean_a = sum(advantages) / n
        var_a = sum((a - mean_a) ** 2 for a in advantages) / n
        adv = [(a - mean_a) / (math.sqrt(var_a) + 1e-8) for a in advantages]
        for _ in range(self.n_epochs):
            self._epoch(obs, actions, old_lps, adv, returns)

    def _epoch(self, obs, actions, old_lps, adv, returns):
        n = len(returns)
        gw1 = [[0.0, 0.0], [0.0, 0.0]]
        gw2 = [[0.0], [0.0]]
        gb1 = [0.0, 0.0]
        gb2 = [0.0]
        gls = 0.0
        hv1 = [[0.0, 0.0], [0.0, 0.0]]
        hv2 = [[0.0], [0.0]]
        hb1 = [0.0, 0.0]
        hb2 = [0.0]
        sigma = math.exp(self.ls)
        for i in range(n):
            x, a = obs[i], actions[i]
            h, mu = self._net(x, self.pw1, self.pb1, self.pw2, self.pb2)
            z = (a - mu) / sigma
            lp = -0.5 * (z * z + 2.0 * self.ls + self.LOG_2PI)
            ratio = math.exp(lp - old_lps[i])
            unclipped = ratio * adv[i]
            clipped_ratio = min(max(ratio, 1.0 - self.clip), 1.0 + self.clip)
            take_clipped = clipped_ratio * adv[i] < unclipped
            glp = 0.0 if take_clipped else -adv[i] * ratio / n
            gmu = glp * z / sigma
            gls += glp * (z * z - 1.0)
            for k in range(2):
                gw2[k][0] += gmu * h[k]
                gz1 = gmu * self.pw2[k][0] * (1.0 - h[k] ** 2)
                gb1[k] += gz1
                for j in range(2):
                    gw1[j][k] += x[j] * gz1
            gb2[0] += gmu

            hv, v = self._net(x, self.vw1, self.vb1, self.vw2, self.vb2)
            gv = self.value_coef * 2.0 * (v - returns[i]) / n
            for k in range(2):
                hv2[k][0] += gv * hv[k]
                gz1 = gv * self.vw2[k][0] * (1.0 - hv[k] ** 2)
                hb1[k] += gz1
                for j in range(2):
                    hv1[j][k] += x[j] * gz1
            hb2[0] += gv
        gls -= self.entropy_coef

        grads = [gw1, gw2, gb1, gb2, [gls], hv1, hv2, hb1, hb2]
        sq = 0.0
        for g in grads:
            for v in self._flat(g):
                sq += v * v
        norm = math.sqrt(sq)
        if norm > self.max_norm:
            scale = self.max_norm / (norm + 1e-6)
            grads = [self._scale(g, scale) for g in grads]
        self._adam(grads)

    @staticmethod
    def _flat(g):
        if isinstance(g[0], list):
            return [v for row in g for v in row]
        return list(g)

    @staticmethod
    def _scale(g, s):
        if isinstance(g[0], list):
            return [[v * s for v in row] for row in g]
        return [v * s for v in g]

    def _adam(self, grads):
        self.adam_t += 1
        c1 = 1.0 - 0.9**self.adam_t
        c2 = 1.0 - 0.999**self.adam_t

        def upd(p, g, m, v):
            for j in range(len(p)):
                if isinstance(p[j], list):
                    upd(p[j], g[j], m[j], v[j])
                else:
                    m[j] = 0.9 * m[j] + 0.1 * g[j]
                    v[j] = 0.999 * v[j] + 0.001 * g[j] * g[j]
                    p[j] -= self.lr * (m[j] / c1) / (math.sqrt(v[j] / c2) + 1e-5)

        for i, p in enumerate(self.params):
            if p == "ls":
                m, v = self.adam_m[i], self.adam_v[i]
                m[0] = 0.9 * m[0] + 0.1 * grads[i][0]
                v[0] = 0.999 * v[0] + 0.001 * grads[i][0] ** 2
                self.ls -= self.lr * (m[0] / c1) / (math.sqrt(v[0] / c2) + 1e-5)
            else:
                upd(p, grads[i], self.adam_m[i], self.adam_v[i])


class TestScalarOracle:
    @pytest.mark.parametrize("entropy_coef", [0.0, 0.01])
    def test_update_matches_independent_reimplementation(self, entropy_coef):
        config = TrainConfig(
            n_epochs=3, minibatch_size=2, hidden=(2,), seed=11,
            entropy_coef=entropy_coef,
        )
        learner = PPOLearner(2, 1, config)
        oracle = ScalarOracle(learner)

        obs = np.array([[0.3, -0.6], [-1.1, 0.8]])
        mean = learner.policy.forward(obs)
        actions = mean + np.array([[0.25], [-0.6]])
        lp = gaussian_log_prob(actions, mean, learner.std())
        # one ratio inside the clip interval, one beyond it
        old_lp = lp + np.array([-0.03, -0.35])
        advantages = np.array([0.9, -1.4])
        returns = np.array([0.2, -0.1])

        learner.ppo_update(obs, actions[:, 0:1], old_lp, advantages.copy(), returns)
        oracle.update(
            [list(map(float, row)) for row in obs],
            [float(a) for a in actions[:, 0]],
            [float(v) for v in old_lp],
            [float(a) for a in advantages],
            [float(r) for r in returns],
        )

        np.testing.assert_allclose(learner.policy.weights[0], oracle.pw1, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.policy.weights[1], oracle.pw2, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.policy.biases[0], oracle.pb1, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.policy.biases[1], oracle.pb2, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.log_std, [oracle.ls], atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.value.weights[0], oracle.vw1, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.value.weights[1], oracle.vw2, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.value.biases[0], oracle.vb1, atol=1e-10, rtol=0)
        np.testing.assert_allclose(learner.value.biases[1], oracle.vb2, atol=1e-10, rtol=0)


def collect_params(learner):
    return [p.copy() for p in learner._param_list]


class TestTrainLoop:
    def test_zero_episodes_writes_initial_checkpoint_only(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        config = TrainConfig(total_episodes=0, hidden=(4,), seed=0)
        result = train(SlideEnv(), config, checkpoint_path=path)
        assert path.exists()
        assert result.history == []
        assert result.metrics == []
        assert result.learner.optimizer.t == 0

    def test_fixed_seed_reproduces_history_and_parameters(self):
        config = TrainConfig(total_episodes=30, n_steps=10, hidden=(8,), seed=7)
        r1 = train(SlideEnv(), config)
        r2 = train(SlideEnv(), config)
        assert [row.episode_return for row in r1.history] == [
            row.episode_return for row in r2.history
        ]
        for a, b in zip(collect_params(r1.learner), collect_params(r2.learner)):
            np.testing.assert_array_equal(a, b)

    def test_different_seeds_diverge(self):
        c1 = TrainConfig(total_episodes=20, n_steps=10, hidden=(8,), seed=0)
        c2 = TrainConfig(total_episodes=20, n_steps=10, hidden=(8,), seed=1)
        r1 = train(SlideEnv(), c1)
        r2 = train(SlideEnv(), c2)
        assert [row.episode_return for row in r1.history] != [
            row.episode_return for row in r2.history
        ]

    def test_history_has_one_row_per_episode_with_lengths(self):
        config = TrainConfig(total_episodes=12, n_steps=10, hidden=(4,), seed=3)
        env = SlideEnv(episode_steps=5)
        result = train(env, config)
        assert len(result.history) == 12
        assert [row.episode for row in result.history] == list(range(12))
        assert all(row.length == 5 for row in result.history)
        assert all(not row.unstable for row in result.history)

    def test_updates_happen_every_n_steps(self):
        config = TrainConfig(total_episodes=10, n_steps=10, hidden=(4,), seed=3)
        env = SlideEnv(episode_steps=5)
        result = train(env, config)
        # 50 transitions at 10 per rollout, minus the trailing partial rollout
        assert len(result.metrics) == 5
        assert result.learner.optimizer.t == 5 * config.n_epochs

    def test_metrics_are_finite(self):
        config = TrainConfig(total_episodes=10, n_steps=10, hidden=(4,), seed=3)
        result = train(SlideEnv(), config)
        for m in result.metrics:
            assert np.isfinite(m.policy_loss)
            assert np.isfinite(m.value_loss)
            assert np.isfinite(m.approx_kl)
            assert 0.0 <= m.clip_fraction <= 1.0
            assert m.skipped_minibatches == 0


class TestCheckpointResume:
    def test_resumed_run_is_bit_identical_to_uninterrupted(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        straight_cfg = TrainConfig(total_episodes=24, n_steps=10, hidden=(8,), seed=9)
        straight = train(SlideEnv(), straight_cfg)

        # 13 episodes stops mid-rollout; the partial buffer must survive
        first_cfg = TrainConfig(total_episodes=13, n_steps=10, hidden=(8,), seed=9)
        env = SlideEnv()
        first = train(env, first_cfg, checkpoint_path=path)

        resume_env = SlideEnv()
        resumed = load_checkpoint(path, straight_cfg, env=resume_env)
        rest = train(resume_env, straight_cfg, learner=resumed, checkpoint_path=path)

        joined = [row.episode_return for row in first.history] + [
            row.episode_return for row in rest.history
        ]
        assert joined == [row.episode_return for row in straight.history]
        for a, b in zip(collect_params(straight.learner), collect_params(rest.learner)):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(
            straight.learner.obs_norm.mean, rest.learner.obs_norm.mean
        )
        assert straight.learner.rng.bit_generator.state == rest.learner.rng.bit_generator.state

    def test_checkpoint_restores_environment_state(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        config = TrainConfig(total_episodes=7, n_steps=10, hidden=(4,), seed=2)
        env = SlideEnv()
        train(env, config, checkpoint_path=path)
        fresh = SlideEnv()
        load_checkpoint(path, config, env=fresh)
        assert fresh.x == env.x
        assert fresh.t == env.t
        assert fresh._done == env._done

    def test_mismatched_config_is_refused(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        config = TrainConfig(total_episodes=4, n_steps=10, hidden=(4,), seed=2)
        train(SlideEnv(), config, checkpoint_path=path)
        other = TrainConfig(total_episodes=4, n_steps=10, hidden=(4,), seed=2,
                            learning_rate=1e-3)
        with pytest.raises(ValueError, match="different train config"):
            load_checkpoint(path, other)

    def test_raising_total_episodes_is_allowed(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        config = TrainConfig(total_episodes=4, n_steps=10, hidden=(4,), seed=2)
        train(SlideEnv(), config, checkpoint_path=path)
        longer = TrainConfig(total_episodes=40, n_steps=10, hidden=(4,), seed=2)
        learner = load_checkpoint(path, longer)
        assert learner.episodes_done == 4

    def test_checkpoint_cadence_writes_during_training(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        config = TrainConfig(total_episodes=10, n_steps=10, hidden=(4,), seed=0)
        seen = []

        def watch(row):
            if path.exists():
                seen.append(load_checkpoint(path, config).episodes_done)

        train(SlideEnv(), config, checkpoint_path=path, checkpoint_every=2,
              episode_callback=watch)
        assert load_checkpoint(path, config).episodes_done == 10
        # intermediate snapshots strictly before the end were observed
        assert any(e < 10 for e in seen)


class TestToyEnvLearning:
    def test_reaches_bonus_radius_within_episode_budget(self):
        config = TrainConfig(
            total_episodes=2000, n_steps=10, learning_rate=1e-3,
            hidden=(16, 16), seed=0,
        )
        env = SlideEnv(target=0.5, bonus_radius=0.05)
        result = train(env, config)
        assert len(result.history) == 2000
        obs = env.reset()
        dist = None
        for _ in range(env.episode_steps):
            action, *_ = result.learner.act(obs, deterministic=True, update_norm=False)
            obs, _, done, info = env.step(action)
            dist = info["distance"]
        assert dist <= env.reward_config.bonus_radius_d
        # returns improved over training
        first = np.mean([r.episode_return for r in result.history[:100]])
        last = np.mean([r.episode_return for r in result.history[-100:]])
        assert last > first
