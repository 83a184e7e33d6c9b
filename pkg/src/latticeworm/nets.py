"""Small dense networks with hand-written reverse-mode gradients, the
moment-based gradient optimizer, and running observation normalization.

Everything operates on float64 numpy arrays; gradient correctness is pinned
against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np


def orthogonal(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float) -> np.ndarray:
    """Orthogonal weight init (QR of a Gaussian, sign-fixed), scaled by gain."""
    flat = rng.standard_normal((max(fan_in, fan_out), min(fan_in, fan_out)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if fan_in < fan_out:
        q = q.T
    return np.ascontiguousarray(gain * q[:fan_in, :fan_out])


class MLP:
    """Dense net with tanh hidden layers and a linear output layer.

    forward() caches activations; backward() consumes an output gradient and
    returns per-parameter gradients in (weights, biases) order.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator, output_gain: float = 1.0):
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = output_gain if i == last else np.sqrt(2.0)
            self.weights.append(orthogonal(rng, fan_in, fan_out, gain))
            self.biases.append(np.zeros(fan_out))
        self._cache: list[np.ndarray] = []

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(x)
        self._cache = [h]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < n_layers - 1:
                h = np.tanh(h)
            self._cache.append(h)
        return h

    def backward(self, grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss given d loss / d output; call right
        after forward() on the same batch. Returns [dW..., db...]."""
        g = np.atleast_2d(grad_out)
        grads_w: list[np.ndarray] = [None] * len(self.weights)
        grads_b: list[np.ndarray] = [None] * len(self.biases)
        for i in reversed(range(len(self.weights))):
            grads_w[i] = self._cache[i].T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                # _cache[i] holds tanh(z_i) for hidden layers
                g = (g @ self.weights[i].T) * (1.0 - self._cache[i] ** 2)
        return [*grads_w, *grads_b]

    def set_params(self, arrays: list[np.ndarray]) -> None:
        n = len(self.weights)
        for i in range(n):
            self.weights[i] = arrays[i].copy()
            self.biases[i] = arrays[n + i].copy()


class Adam:
    """Moment-based gradient descent over a flat list of parameter arrays."""

    def __init__(self, shapes: list[tuple], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-5):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def global_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint norm is at most max_norm;
    returns the pre-clip norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for g in grads:
            g *= scale
    return norm


class RunningNorm:
    """Streaming mean/variance normalizer (parallel-merge update).

    Normalized values are clipped to [-clip, clip]; state is part of the
    training checkpoint.
    """

    def __init__(self, dim: int, clip: float = 10.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 1e-4
        self.clip = clip

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(batch)
        batch_count = batch.shape[0]
        batch_mean = batch.mean(axis=0)
        batch_var = batch.var(axis=0)
        delta = batch_mean - self.mean
        total = self.count + batch_count
        self.mean = self.mean + delta * (batch_count / total)
        m2 = (
            self.var * self.count
            + batch_var * batch_count
            + delta**2 * (self.count * batch_count / total)
        )
        self.var = m2 / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        scaled = (x - self.mean) / np.sqrt(self.var + 1e-8)
        return np.clip(scaled, -self.clip, self.clip)

    def state(self) -> dict[str, np.ndarray]:
        return {
            "mean": self.mean.copy(),
            "var": self.var.copy(),
            "count": np.array(self.count),
        }

    def load_state(self, state) -> None:
        self.mean = np.asarray(state["mean"], dtype=float).copy()
        self.var = np.asarray(state["var"], dtype=float).copy()
        self.count = float(state["count"])
