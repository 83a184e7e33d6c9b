"""Clipped-surrogate policy-gradient learner with hand-written gradients.

A diagonal-Gaussian tanh MLP policy and an MLP value function share one
moment-based optimizer. Rollouts of n_steps transitions are scored with
generalized advantage estimation and fed through the clipped objective for
several epochs of minibatch updates.

Actions are sampled unbounded and clipped to [0, 1] at the environment
boundary; log-probabilities are recorded on the raw sample. Observations are
normalized by running statistics that update once per acted-on observation
(update, then normalize), and the normalizer is part of the checkpoint.

Checkpoints capture everything needed to continue training bit-identically:
network and optimizer tensors, normalizer, RNG state, loop counters, the
pending observation, and (when given) the environment's full state.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .nets import MLP, Adam, RunningNorm, clip_by_global_norm

logger = logging.getLogger(__name__)

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))
CHECKPOINT_VERSION = 1
MAX_CONSECUTIVE_BAD_UPDATES = 10


@dataclass(frozen=True)
class TrainConfig:
    n_steps: int = 2
    learning_rate: float = 3e-4
    discount_gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    n_epochs: int = 10
    minibatch_size: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    total_episodes: int = 1000
    seed: int = 0
    hidden: tuple[int, int] = (64, 64)

    def __post_init__(self) -> None:
        if not 0.0 < self.discount_gamma <= 1.0:
            raise ValueError("discount_gamma must be in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.clip_range <= 0.0:
            raise ValueError("clip_range must be positive")
        if self.n_steps < 1 or self.n_epochs < 1 or self.minibatch_size < 1:
            raise ValueError("n_steps, n_epochs, minibatch_size must be at least 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.total_episodes < 0:
            raise ValueError("total_episodes must be non-negative")


def gaussian_log_prob(action: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Sum of per-dimension Gaussian log densities; row-wise over batches."""
    z = (action - mean) / std
    return -0.5 * np.sum(z * z + 2.0 * np.log(std) + _LOG_2PI, axis=-1)


def compute_gae(rewards, values, dones, bootstrap_value, discount_gamma, gae_lambda):
    """Reverse-scan advantage estimation.

    delta_t = r_t + gamma*V(s_{t+1})*(1 - done_t) - V(s_t), accumulated with
    factor gamma*lambda*(1 - done_t); returns are advantages + values. The
    advantages come back unnormalized (the update normalizes its own copy).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    n = rewards.shape[0]
    advantages = np.empty(n)
    acc = 0.0
    for t in reversed(range(n)):
        next_value = bootstrap_value if t == n - 1 else values[t + 1]
        mask = 1.0 - dones[t]
        delta = rewards[t] + discount_gamma * next_value * mask - values[t]
        acc = delta + discount_gamma * gae_lambda * mask * acc
        advantages[t] = acc
    return advantages, advantages + values


class RolloutBuffer:
    """Fixed-capacity transition store for one update."""

    def __init__(self, n_steps: int, obs_dim: int, n_actions: int):
        self.capacity = n_steps
        self.obs = np.zeros((n_steps, obs_dim))
        self.actions = np.zeros((n_steps, n_actions))
        self.log_probs = np.zeros(n_steps)
        self.rewards = np.zeros(n_steps)
        self.values = np.zeros(n_steps)
        self.dones = np.zeros(n_steps)
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos >= self.capacity

    def add(self, obs, action, log_prob, reward, value, done) -> None:
        if self.full:
            raise RuntimeError("rollout buffer is full")
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = float(done)
        self.pos += 1

    def clear(self) -> None:
        self.pos = 0


@dataclass
class UpdateMetrics:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    skipped_minibatches: int


@dataclass
class EpisodeRow:
    episode: int
    episode_return: float
    length: int
    unstable: bool
    final_distance: float


@dataclass
class TrainResult:
    learner: "PPOLearner"
    history: list[EpisodeRow]
    metrics: list[UpdateMetrics]


class PPOLearner:
    """Policy, value function, optimizer, normalizer, and loop counters."""

    def __init__(self, obs_dim: int, n_actions: int, config: TrainConfig):
        self.config = config
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.rng = np.random.default_rng(config.seed)
        hidden = list(config.hidden)
        self.policy = MLP([obs_dim, *hidden, n_actions], self.rng, output_gain=0.01)
        self.log_std = np.zeros(n_actions)
        self.value = MLP([obs_dim, *hidden, 1], self.rng, output_gain=1.0)
        self.obs_norm = RunningNorm(obs_dim)
        self._param_list = [
            *self.policy.weights,
            *self.policy.biases,
            self.log_std,
            *self.value.weights,
            *self.value.biases,
        ]
        self.optimizer = Adam([p.shape for p in self._param_list], config.learning_rate)
        # training-loop state, carried through checkpoints so a resumed run
        # continues bit-identically (including a partially filled rollout)
        self.buffer = RolloutBuffer(config.n_steps, obs_dim, n_actions)
        self.episodes_done = 0
        self.episode_return = 0.0
        self.episode_length = 0
        self.consecutive_bad_updates = 0
        self.awaiting_reset = False
        self.pending_obs: np.ndarray | None = None

    # ---------------------------------------------------------------- forward

    def std(self) -> np.ndarray:
        return np.exp(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))

    def policy_forward(self, norm_obs: np.ndarray):
        """Deterministic forward pass on normalized observations; returns
        (mean (batch, n_actions), std (n_actions,), value (batch,))."""
        mean = self.policy.forward(norm_obs)
        value = self.value.forward(norm_obs)[:, 0]
        return mean, self.std(), value

    def sample_action(self, mean: np.ndarray, std: np.ndarray):
        """Diagonal Gaussian draw; log-prob of the raw (unclipped) sample."""
        noise = self.rng.standard_normal(mean.shape[-1])
        action = mean + std * noise
        return action, float(gaussian_log_prob(action, mean, std))

    def act(self, obs: np.ndarray, deterministic: bool = False, update_norm: bool = True):
        """Normalize an observation (updating the running stats by default),
        run the nets, and sample. Returns (action, log_prob, value, norm_obs)."""
        obs = np.asarray(obs, dtype=float).ravel()
        if update_norm:
            self.obs_norm.update(obs)
        norm_obs = self.obs_norm.normalize(obs)
        mean, std, value = self.policy_forward(norm_obs)
        if deterministic:
            action = mean[0].copy()
            log_prob = float(gaussian_log_prob(action, mean[0], std))
        else:
            action, log_prob = self.sample_action(mean[0], std)
        return action, log_prob, float(value[0]), norm_obs

    def value_of(self, obs: np.ndarray) -> float:
        """Value at an observation without touching the running stats."""
        norm_obs = self.obs_norm.normalize(np.asarray(obs, dtype=float).ravel())
        return float(self.value.forward(norm_obs)[0, 0])

    # ----------------------------------------------------------------- update

    def ppo_update(self, obs, actions, old_log_probs, advantages, returns) -> UpdateMetrics:
        """Several epochs of shuffled clipped-surrogate minibatch steps.

        Advantages are normalized (zero mean, unit variance) over the whole
        buffer when it holds more than one transition. Minibatches with a
        non-finite loss or gradient are skipped and counted.
        """
        n = len(returns)
        if n > 1:
            advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        batch = min(self.config.minibatch_size, n)
        totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
                  "clip_fraction": 0.0, "approx_kl": 0.0}
        n_batches = 0
        skipped = 0
        for _ in range(self.config.n_epochs):
            perm = self.rng.permutation(n)
            for start in range(0, n, batch):
                idx = perm[start:start + batch]
                stats = self._minibatch_step(
                    obs[idx], actions[idx], old_log_probs[idx], advantages[idx], returns[idx]
                )
                if stats is None:
                    skipped += 1
                    continue
                for key in totals:
                    totals[key] += stats[key]
                n_batches += 1
        scale = 1.0 / max(n_batches, 1)
        return UpdateMetrics(
            policy_loss=totals["policy_loss"] * scale,
            value_loss=totals["value_loss"] * scale,
            entropy=totals["entropy"] * scale,
            clip_fraction=totals["clip_fraction"] * scale,
            approx_kl=totals["approx_kl"] * scale,
            skipped_minibatches=skipped,
        )

    def _loss_and_grads(self, obs, actions, old_log_probs, advantages, returns):
        """Total loss, unclipped gradients in parameter order, and stats."""
        cfg = self.config
        b = len(returns)
        mean = self.policy.forward(obs)
        log_std_eff = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std_eff)
        z = (actions - mean) / std
        new_log_probs = -0.5 * np.sum(z * z + 2.0 * log_std_eff + _LOG_2PI, axis=1)
        ratio = np.exp(new_log_probs - old_log_probs)
        unclipped = ratio * advantages
        clipped = np.clip(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range) * advantages
        # tie goes to the unclipped branch; the clipped branch is only
        # selected with the ratio saturated, where its gradient is zero
        take_clipped = clipped < unclipped
        policy_loss = -np.where(take_clipped, clipped, unclipped).mean()

        value_pred = self.value.forward(obs)[:, 0]
        value_err = value_pred - returns
        value_loss = float(np.mean(value_err**2))
        entropy = float(np.sum(log_std_eff + 0.5 * (1.0 + _LOG_2PI)))
        total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy

        grad_lp = np.where(take_clipped, 0.0, -advantages * ratio) / b
        grad_mean = grad_lp[:, None] * (z / std)
        grad_log_std = np.sum(grad_lp[:, None] * (z * z - 1.0), axis=0)
        grad_log_std -= cfg.entropy_coef * 1.0  # d entropy / d log_std = 1 per dim
        clamp_active = (self.log_std <= LOG_STD_MIN) | (self.log_std >= LOG_STD_MAX)
        grad_log_std = np.where(clamp_active, 0.0, grad_log_std)
        policy_grads = self.policy.backward(grad_mean)
        grad_value_out = (cfg.value_coef * 2.0 / b) * value_err[:, None]
        value_grads = self.value.backward(grad_value_out)
        grads = [*policy_grads, grad_log_std, *value_grads]

        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = new_log_probs - old_log_probs
        stats = {
            "policy_loss": float(policy_loss),
            "value_loss": value_loss,
            "entropy": entropy,
            "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_range)),
            "approx_kl": float(np.mean((ratio - 1.0) - log_ratio)),
        }
        return float(total), grads, stats

    def _minibatch_step(self, obs, actions, old_log_probs, advantages, returns):
        total, grads, stats = self._loss_and_grads(
            obs, actions, old_log_probs, advantages, returns
        )
        if not np.isfinite(total):
            logger.warning("non-finite loss %r, skipping minibatch", total)
            return None
        if not all(np.isfinite(g).all() for g in grads):
            logger.warning("non-finite gradients, skipping minibatch")
            return None
        clip_by_global_norm(grads, self.config.max_grad_norm)
        self.optimizer.step(self._param_list, grads)
        if not all(np.isfinite(p).all() for p in self._param_list):
            raise RuntimeError("parameters became non-finite after an update")
        return stats


# -------------------------------------------------------------- training loop


def train(
    env,
    config: TrainConfig,
    *,
    target_index: int | None = None,
    learner: PPOLearner | None = None,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = 0,
    episode_callback=None,
) -> TrainResult:
    """Alternate collecting n_steps transitions and updating until
    total_episodes episodes finish.

    Pass a learner restored by load_checkpoint (with its environment) to
    continue a run; training then proceeds bit-identically to an
    uninterrupted run. A history row is produced per episode; unstable
    episodes are flagged so reporting can exclude them from averages.
    """
    if learner is None:
        obs = env.reset(seed=config.seed, target_index=target_index)
        learner = PPOLearner(obs.size, env.n_muscles, config)
    else:
        if learner.pending_obs is None:
            raise ValueError("resumed learner is missing its pending observation")
        obs = learner.pending_obs
    buffer = learner.buffer
    history: list[EpisodeRow] = []
    metrics_log: list[UpdateMetrics] = []

    def save(path) -> None:
        learner.pending_obs = np.asarray(obs, dtype=float).copy()
        save_checkpoint(path, learner, env)

    if checkpoint_path is not None and learner.episodes_done == 0:
        save(checkpoint_path)

    last_checkpoint = learner.episodes_done
    while learner.episodes_done < config.total_episodes:
        if learner.awaiting_reset:
            obs = env.reset()
            learner.awaiting_reset = False
        while not buffer.full:
            action, log_prob, value, norm_obs = learner.act(obs)
            next_obs, reward, done, info = env.step(action)
            buffer.add(norm_obs, action, log_prob, reward, value, done)
            obs = next_obs
            learner.episode_return += reward
            learner.episode_length += 1
            if done:
                row = EpisodeRow(
                    episode=learner.episodes_done,
                    episode_return=learner.episode_return,
                    length=learner.episode_length,
                    unstable=bool(info.get("instability", False)),
                    final_distance=float(info.get("distance", float("nan"))),
                )
                history.append(row)
                if episode_callback is not None:
                    episode_callback(row)
                learner.episodes_done += 1
                learner.episode_return = 0.0
                learner.episode_length = 0
                if learner.episodes_done >= config.total_episodes:
                    # stop here; the partial rollout and the pending reset
                    # are checkpointed so a longer run continues identically
                    learner.awaiting_reset = True
                    break
                obs = env.reset()
        if not buffer.full:
            break
        bootstrap = learner.value_of(obs)
        advantages, returns = compute_gae(
            buffer.rewards, buffer.values, buffer.dones, bootstrap,
            config.discount_gamma, config.gae_lambda,
        )
        metrics = learner.ppo_update(
            buffer.obs, buffer.actions, buffer.log_probs, advantages, returns
        )
        buffer.clear()
        metrics_log.append(metrics)
        if metrics.skipped_minibatches > 0:
            learner.consecutive_bad_updates += 1
            if learner.consecutive_bad_updates > MAX_CONSECUTIVE_BAD_UPDATES:
                raise RuntimeError(
                    f"{learner.consecutive_bad_updates} consecutive updates with "
                    f"non-finite losses at episode {learner.episodes_done}; aborting"
                )
        else:
            learner.consecutive_bad_updates = 0
        if (
            checkpoint_path is not None
            and checkpoint_every > 0
            and learner.episodes_done - last_checkpoint >= checkpoint_every
        ):
            save(checkpoint_path)
            last_checkpoint = learner.episodes_done
    learner.pending_obs = np.asarray(obs, dtype=float).copy()
    if checkpoint_path is not None:
        save(checkpoint_path)
    return TrainResult(learner=learner, history=history, metrics=metrics_log)


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path: str | Path, learner: PPOLearner, env=None) -> None:
    """Single-file dump of learner (and optionally environment) state."""
    blob: dict[str, np.ndarray] = {"version": np.array(CHECKPOINT_VERSION)}
    for i, w in enumerate(learner.policy.weights):
        blob[f"policy_w_{i}"] = w
    for i, b in enumerate(learner.policy.biases):
        blob[f"policy_b_{i}"] = b
    for i, w in enumerate(learner.value.weights):
        blob[f"value_w_{i}"] = w
    for i, b in enumerate(learner.value.biases):
        blob[f"value_b_{i}"] = b
    blob["log_std"] = learner.log_std
    for i, m in enumerate(learner.optimizer.m):
        blob[f"adam_m_{i}"] = m
    for i, v in enumerate(learner.optimizer.v):
        blob[f"adam_v_{i}"] = v
    blob["adam_t"] = np.array(learner.optimizer.t)
    for key, value in learner.obs_norm.state().items():
        blob[f"norm_{key}"] = value
    blob["rng_state"] = np.array(json.dumps(learner.rng.bit_generator.state))
    blob["config_json"] = np.array(json.dumps(asdict(learner.config)))
    blob["episodes_done"] = np.array(learner.episodes_done)
    blob["episode_return"] = np.array(learner.episode_return)
    blob["episode_length"] = np.array(learner.episode_length)
    blob["consecutive_bad"] = np.array(learner.consecutive_bad_updates)
    blob["awaiting_reset"] = np.array(learner.awaiting_reset)
    buf = learner.buffer
    blob["buf_obs"] = buf.obs
    blob["buf_actions"] = buf.actions
    blob["buf_log_probs"] = buf.log_probs
    blob["buf_rewards"] = buf.rewards
    blob["buf_values"] = buf.values
    blob["buf_dones"] = buf.dones
    blob["buf_pos"] = np.array(buf.pos)
    if learner.pending_obs is not None:
        blob["pending_obs"] = learner.pending_obs
    if env is not None:
        for key, value in env.get_state().items():
            blob[f"env_{key}"] = value
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **blob)
    tmp.replace(path)


def load_checkpoint(path: str | Path, config: TrainConfig, env=None) -> PPOLearner:
    """Rebuild a learner (and restore the environment, when given) from a
    checkpoint. The provided config must match the one that wrote it."""
    with np.load(Path(path), allow_pickle=False) as blob:
        stored = json.loads(str(blob["config_json"]))
        given = asdict(config)
        given["hidden"] = list(given["hidden"])
        # total_episodes is a stopping criterion, not part of the dynamics;
        # raising it is how a run is extended
        stored.pop("total_episodes", None)
        given.pop("total_episodes", None)
        if stored != given:
            raise ValueError("checkpoint was written with a different train config")
        n_actions = blob["log_std"].shape[0]
        obs_dim = blob["policy_w_0"].shape[0]
        learner = PPOLearner(obs_dim, n_actions, config)
        n_layers = len(learner.policy.weights)
        for i in range(n_layers):
            learner.policy.weights[i][:] = blob[f"policy_w_{i}"]
            learner.policy.biases[i][:] = blob[f"policy_b_{i}"]
            learner.value.weights[i][:] = blob[f"value_w_{i}"]
            learner.value.biases[i][:] = blob[f"value_b_{i}"]
        learner.log_std[:] = blob["log_std"]
        for i in range(len(learner._param_list)):
            learner.optimizer.m[i][:] = blob[f"adam_m_{i}"]
            learner.optimizer.v[i][:] = blob[f"adam_v_{i}"]
        learner.optimizer.t = int(blob["adam_t"])
        learner.obs_norm.load_state(
            {"mean": blob["norm_mean"], "var": blob["norm_var"], "count": blob["norm_count"]}
        )
        learner.rng.bit_generator.state = json.loads(str(blob["rng_state"]))
        learner.episodes_done = int(blob["episodes_done"])
        learner.episode_return = float(blob["episode_return"])
        learner.episode_length = int(blob["episode_length"])
        learner.consecutive_bad_updates = int(blob["consecutive_bad"])
        learner.awaiting_reset = bool(blob["awaiting_reset"])
        buf = learner.buffer
        buf.obs[:] = blob["buf_obs"]
        buf.actions[:] = blob["buf_actions"]
        buf.log_probs[:] = blob["buf_log_probs"]
        buf.rewards[:] = blob["buf_rewards"]
        buf.values[:] = blob["buf_values"]
        buf.dones[:] = blob["buf_dones"]
        buf.pos = int(blob["buf_pos"])
        if "pending_obs" in blob:
            learner.pending_obs = np.asarray(blob["pending_obs"], dtype=float).copy()
        if env is not None:
            env_state = {
                key[len("env_"):]: blob[key] for key in blob.files if key.startswith("env_")
            }
            if env_state:
                env.set_state(env_state)
    return learner
