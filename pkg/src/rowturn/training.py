"""Dataset chunking, normalization, optimization, and gradient verification.

Demonstrations become sliding-window (observation, action-chunk) pairs,
min-max normalized to [-1, 1]; a seeded Adam loop with cosine learning-rate
decay and parameter EMA trains the denoiser; a central-difference checker
validates the hand-rolled gradients parameter by parameter.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demos import Demonstration
from .diffusion import (
    Checkpoint,
    NoiseSchedule,
    NormStats,
    build_schedule,
    minmax_stats,
)
from .nn import Denoiser, MLP


@dataclass(frozen=True)
class DiffusionConfig:
    T: int = 50
    beta_min: float = 1e-4
    beta_max: float = 0.02
    horizon: int = 16
    hidden: tuple[int, ...] = (256, 256, 256)
    time_dim: int = 16

    def validate(self) -> None:
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if not (0.0 < self.beta_min <= self.beta_max < 1.0):
            raise ValueError(f"invalid beta range [{self.beta_min}, {self.beta_max}]")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.time_dim % 2 != 0:
            raise ValueError(f"time_dim must be even, got {self.time_dim}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    lr_min: float = 1e-5
    seed: int = 0
    ema_decay: float = 0.995
    chunk_stride: int = 4

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.learning_rate < 1.0:
            raise ValueError(f"learning_rate must be in (0, 1), got {self.learning_rate}")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must be in [0, 1), got {self.ema_decay}")
        if self.chunk_stride < 1:
            raise ValueError(f"chunk_stride must be >= 1, got {self.chunk_stride}")


@dataclass
class ChunkedDataset:
    """Normalized (observation, action chunk) pairs plus their statistics."""

    obs: np.ndarray  # (N, d_obs), normalized
    chunks: np.ndarray  # (N, H, 2), normalized
    norm: NormStats
    horizon: int
    n_obs: int = 1
    scan_dim: int = 0

    def __len__(self) -> int:
        return len(self.obs)

    @property
    def obs_dim(self) -> int:
        return self.obs.shape[1]

    @staticmethod
    def from_arrays(
        obs_raw: np.ndarray, chunks_raw: np.ndarray, n_obs: int = 1, scan_dim: int = 0
    ) -> "ChunkedDataset":
        """Normalize raw pairs with per-dimension min-max statistics."""
        n, h, adim = chunks_raw.shape
        a_center, a_scale, a_degen = minmax_stats(chunks_raw.reshape(n * h, adim))
        o_center, o_scale, o_degen = minmax_stats(obs_raw)
        norm = NormStats(a_center, a_scale, o_center, o_scale, a_degen, o_degen)
        return ChunkedDataset(
            obs=norm.normalize_obs(obs_raw),
            chunks=norm.normalize_actions(chunks_raw),
            norm=norm,
            horizon=h,
            n_obs=n_obs,
            scan_dim=scan_dim,
        )


def chunk_starts(n_steps: int, stride: int) -> range:
    return range(0, n_steps, stride)


def normalize_dataset(
    demos: list[Demonstration],
    horizon: int,
    stride: int,
    n_obs: int,
    scan_dim: int,
) -> ChunkedDataset:
    """Sliding-window chunks over every demo, min-max normalized.

    Window tails past a trajectory end are padded by repeating its final
    action, so end-of-turn behavior stays represented.
    """
    if not demos:
        raise ValueError("empty dataset")
    obs_dim = n_obs * (scan_dim + 2)
    obs_rows: list[np.ndarray] = []
    chunk_rows: list[np.ndarray] = []
    for d, demo in enumerate(demos):
        if not demo.steps:
            raise ValueError(f"demo {d} has no steps")
        actions = np.array([s.action for s in demo.steps], dtype=np.float64)
        if demo.steps[0].obs.shape != (obs_dim,):
            raise ValueError(
                f"demo {d}: obs dim {demo.steps[0].obs.shape} != expected ({obs_dim},)"
            )
        n = len(demo.steps)
        for start in chunk_starts(n, stride):
            window = actions[start : start + horizon]
            if len(window) < horizon:
                pad = np.repeat(actions[-1][None, :], horizon - len(window), axis=0)
                window = np.concatenate([window, pad], axis=0)
            obs_rows.append(demo.steps[start].obs)
            chunk_rows.append(window)
    return ChunkedDataset.from_arrays(
        np.array(obs_rows), np.array(chunk_rows), n_obs=n_obs, scan_dim=scan_dim
    )


# ---------------------------------------------------------------------------
# Optimization


def _loss_and_grads(
    den: Denoiser,
    obs: np.ndarray,
    a0: np.ndarray,
    sched: NoiseSchedule,
    ts: np.ndarray,
    eps: np.ndarray,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Noise-prediction MSE and gradients at fixed (t, eps) draws."""
    b = a0.shape[0]
    ab = sched.alpha_bar[ts][:, None, None]
    a_t = np.sqrt(ab) * a0 + np.sqrt(1.0 - ab) * eps
    x = den.assemble_input(a_t, obs, ts)
    out, cache = den.net.forward(x)
    resid = out - eps.reshape(b, -1)
    per_item = (resid**2).mean(axis=1)
    loss = float(per_item.mean())
    if not math.isfinite(loss):
        bad = int(np.flatnonzero(~np.isfinite(per_item))[0])
        raise FloatingPointError(f"non-finite training loss at batch index {bad}")
    grads = den.net.backward(cache, (2.0 / resid.size) * resid)
    return loss, grads


def cosine_lr(step: int, total_steps: int, lr0: float, lr_min: float) -> float:
    frac = step / max(1, total_steps - 1) if total_steps > 1 else 0.0
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * frac))


def fit(
    data: ChunkedDataset,
    cfg: TrainConfig,
    diff: DiffusionConfig,
    config_digest: str = "",
    log_path: str | Path | None = None,
) -> Checkpoint:
    """Adam on the noise-prediction loss over seeded shuffled mini-batches.

    The exponential moving average of the parameters, not the raw iterate,
    goes into the checkpoint. Fully deterministic given cfg.seed.
    """
    cfg.validate()
    diff.validate()
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.horizon != diff.horizon:
        raise ValueError(f"dataset horizon {data.horizon} != configured {diff.horizon}")

    sched = build_schedule(diff.T, diff.beta_min, diff.beta_max)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    den = Denoiser.create(diff.horizon, data.obs_dim, list(diff.hidden), diff.time_dim, rng)

    theta = den.net.to_vector()
    ema = theta.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8

    n = len(data)
    n_batches = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * n_batches
    step = 0
    log_f = open(log_path, "w", encoding="utf-8") if log_path else None
    t_start = time.monotonic()
    epoch_loss = 0.0
    try:
        for epoch in range(cfg.epochs):
            perm = rng.permutation(n)
            epoch_loss = 0.0
            for bi in range(n_batches):
                idx = perm[bi * cfg.batch_size : (bi + 1) * cfg.batch_size]
                ts = rng.integers(1, sched.T + 1, size=len(idx))
                eps = rng.standard_normal((len(idx), diff.horizon, 2))
                try:
                    loss, grads = _loss_and_grads(
                        den, data.obs[idx], data.chunks[idx], sched, ts, eps
                    )
                except FloatingPointError as exc:
                    raise FloatingPointError(f"epoch {epoch} batch {bi}: {exc}") from exc
                g = MLP.grads_to_vector(grads)

                lr = cosine_lr(step, total_steps, cfg.learning_rate, cfg.lr_min)
                m = beta1 * m + (1.0 - beta1) * g
                v = beta2 * v + (1.0 - beta2) * g * g
                mhat = m / (1.0 - beta1 ** (step + 1))
                vhat = v / (1.0 - beta2 ** (step + 1))
                theta = theta - lr * mhat / (np.sqrt(vhat) + adam_eps)
                den.net.from_vector(theta)
                ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * theta

                epoch_loss += loss
                step += 1
            epoch_loss /= n_batches
            if log_f:
                log_f.write(
                    json.dumps(
                        {
                            "epoch": epoch,
                            "step": step,
                            "loss": epoch_loss,
                            "lr": cosine_lr(step - 1, total_steps, cfg.learning_rate, cfg.lr_min),
                            "wall_time": time.monotonic() - t_start,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
    finally:
        if log_f:
            log_f.close()

    den.net.from_vector(ema)
    return Checkpoint(
        denoiser=den,
        schedule=sched,
        norm=data.norm,
        n_obs=data.n_obs,
        scan_dim=data.scan_dim,
        hidden=list(diff.hidden),
        schedule_params=(diff.T, diff.beta_min, diff.beta_max),
        config_digest=config_digest,
        train_info={"epochs": cfg.epochs, "steps": step, "final_loss": epoch_loss},
    )


# ---------------------------------------------------------------------------
# Gradient verification


def finite_diff_gradcheck(
    den: Denoiser,
    obs: np.ndarray,
    a0: np.ndarray,
    sched: NoiseSchedule,
    h: float = 1e-5,
    seed: int = 0,
    grad_override: np.ndarray | None = None,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    The (t, eps) draws are fixed once, so every finite-difference probe
    evaluates the same deterministic loss surface. grad_override substitutes
    a corrupted analytic gradient (negative-control fixture).
    """
    n_params = den.net.n_params
    if n_params > 10_000:
        raise ValueError(f"gradcheck limited to 1e4 parameters, got {n_params}")
    rng = np.random.Generator(np.random.PCG64(seed))
    ts = rng.integers(1, sched.T + 1, size=a0.shape[0])
    eps = rng.standard_normal(a0.shape)

    _, grads = _loss_and_grads(den, obs, a0, sched, ts, eps)
    g_analytic = MLP.grads_to_vector(grads) if grad_override is None else grad_override

    theta = den.net.to_vector()
    worst = 0.0
    try:
        for i in range(n_params):
            probe = theta.copy()
            probe[i] = theta[i] + h
            den.net.from_vector(probe)
            lp, _ = _loss_and_grads(den, obs, a0, sched, ts, eps)
            probe[i] = theta[i] - h
            den.net.from_vector(probe)
            lm, _ = _loss_and_grads(den, obs, a0, sched, ts, eps)
            g_fd = (lp - lm) / (2.0 * h)
            rel = abs(g_fd - g_analytic[i]) / max(abs(g_fd), abs(g_analytic[i]), 1e-6)
            worst = max(worst, rel)
    finally:
        den.net.from_vector(theta)
    return worst
