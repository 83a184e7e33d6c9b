"""Shared test helpers: finite-difference gradients and a 1-D toy
environment driving the learner without lattice physics."""

import numpy as np

from latticeworm.env import RewardConfig, reward


def fd_gradient(loss_fn, arrays, h=1e-5):
    """Central finite differences of a scalar function over a parameter
    list; perturbs the arrays in place and restores them."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            keep = a[idx]
            a[idx] = keep + h
            up = loss_fn()
            a[idx] = keep - h
            down = loss_fn()
            a[idx] = keep
            g[idx] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


class SlideEnv:
    """Single-muscle positioner: the action is the next position on [0, 1]
    and the reward is the lattice reward evaluated at |x - target|.

    Mirrors the reaching environment's interface (reset/step/n_muscles and
    the checkpoint state accessors) so the training loop can be exercised
    end to end in milliseconds.
    """

    def __init__(self, target=0.5, bonus_radius=0.05, episode_steps=5):
        self.n_muscles = 1
        self.target = float(target)
        self.episode_steps = int(episode_steps)
        self.reward_config = RewardConfig(bonus_radius_d=bonus_radius)
        self.x = 0.0
        self.t = 0
        self._done = True

    def _obs(self):
        return np.array([self.x, self.target])

    def reset(self, seed=None, target_index=None):
        self.x = 0.0
        self.t = 0
        self._done = False
        return self._obs()

    def step(self, action):
        if self._done:
            raise RuntimeError("episode is done; call reset() first")
        self.x = float(np.clip(np.asarray(action, dtype=float)[0], 0.0, 1.0))
        self.t += 1
        n = abs(self.x - self.target)
        self._done = self.t >= self.episode_steps
        info = {"distance": n, "instability": False}
        return self._obs(), reward(n, self.reward_config), self._done, info

    def get_state(self):
        return {
            "x": np.array(self.x),
            "t": np.array(self.t),
            "done": np.array(self._done),
        }

    def set_state(self, state):
        self.x = float(state["x"])
        self.t = int(state["t"])
        self._done = bool(state["done"])
