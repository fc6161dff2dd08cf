"""Minimal fully connected network with hand-rolled reverse-mode gradients.

Float64 everywhere, tanh hidden nonlinearity (smooth, so finite-difference
verification is meaningful), linear output layer. The parameter vector
flattening here is the canonical layout for checkpoints, the optimizer, and
the gradient checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class MLP:
    sizes: list[int]  # [d_in, hidden..., d_out]
    weights: list[np.ndarray]  # weights[i]: (sizes[i], sizes[i+1])
    biases: list[np.ndarray]  # biases[i]: (sizes[i+1],)

    @staticmethod
    def create(sizes: list[int], rng: np.random.Generator) -> "MLP":
        """Glorot-scaled normal init, seeded."""
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            std = math.sqrt(2.0 / (n_in + n_out))
            weights.append(rng.normal(0.0, std, size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        return MLP(list(sizes), weights, biases)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward pass; returns (output, activation cache)."""
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"input shape {x.shape} incompatible with d_in={self.sizes[0]}")
        acts = [x]
        h = x
        for i in range(len(self.weights) - 1):
            h = np.tanh(h @ self.weights[i] + self.biases[i])
            acts.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        return out, acts

    def backward(
        self, acts: list[np.ndarray], d_out: np.ndarray
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of a scalar loss w.r.t. every (W, b), given dL/d_out."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)  # type: ignore
        dh = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            grads[i] = (acts[i].T @ dh, dh.sum(axis=0))
            if i > 0:
                dh = (dh @ self.weights[i].T) * (1.0 - acts[i] ** 2)  # tanh'
        return grads

    # -- flat parameter vector ------------------------------------------------

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [a.ravel() for w, b in zip(self.weights, self.biases) for a in (w, b)]
        )

    def from_vector(self, vec: np.ndarray) -> None:
        if vec.size != self.n_params:
            raise ValueError(f"vector size {vec.size} != parameter count {self.n_params}")
        k = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = vec[k : k + w.size].reshape(w.shape).copy()
            k += w.size
            self.biases[i] = vec[k : k + b.size].copy()
            k += b.size

    @staticmethod
    def grads_to_vector(grads: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        return np.concatenate([a.ravel() for dw, db in grads for a in (dw, db)])


def time_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer diffusion steps; shape (B, dim)."""
    if dim % 2 != 0:
        raise ValueError(f"time embedding dim must be even, got {dim}")
    half = dim // 2
    if half > 1:
        freqs = np.exp(-math.log(10000.0) * np.arange(half) / (half - 1))
    else:
        freqs = np.ones(1)
    ang = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


@dataclass
class Denoiser:
    """Noise-prediction network over (flattened chunk, observation, step)."""

    horizon: int
    action_dim: int
    obs_dim: int
    time_dim: int
    net: MLP

    @staticmethod
    def create(
        horizon: int,
        obs_dim: int,
        hidden: list[int],
        time_dim: int,
        rng: np.random.Generator,
        action_dim: int = 2,
    ) -> "Denoiser":
        d_in = horizon * action_dim + obs_dim + time_dim
        d_out = horizon * action_dim
        net = MLP.create([d_in] + list(hidden) + [d_out], rng)
        return Denoiser(horizon, action_dim, obs_dim, time_dim, net)

    def assemble_input(self, a_t: np.ndarray, obs: np.ndarray, t: np.ndarray) -> np.ndarray:
        b = a_t.shape[0]
        if a_t.shape != (b, self.horizon, self.action_dim):
            raise ValueError(f"chunk shape {a_t.shape} != (B, {self.horizon}, {self.action_dim})")
        if obs.shape != (b, self.obs_dim):
            raise ValueError(f"obs shape {obs.shape} != (B, {self.obs_dim})")
        return np.concatenate(
            [a_t.reshape(b, -1), obs, time_embedding(t, self.time_dim)], axis=1
        )

    def predict_batch(
        self, a_t: np.ndarray, obs: np.ndarray, t: np.ndarray
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        out, cache = self.net.forward(self.assemble_input(a_t, obs, t))
        return out.reshape(a_t.shape), cache

    def predict(self, a_t: np.ndarray, obs: np.ndarray, t: int) -> np.ndarray:
        """Single-sample noise prediction; deterministic in its inputs."""
        out, _ = self.predict_batch(a_t[None], obs[None], np.array([t]))
        return out[0]
