"""Conditional denoising diffusion over action chunks.

Forward noising with a linear variance schedule, noise-prediction training
objective, ancestral reverse sampling with fixed posterior variances, and a
variational-bound diagnostic. The diffusion variable is a normalized
horizon-by-2 action chunk; the conditioning input is the flat observation
vector from the simulator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn import MLP, Denoiser

SCHEMA_VERSION = 1
CHECKPOINT_KIND = "rowturn-checkpoint"


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule and derived quantities, indexed by step t in 1..T.

    Arrays have length T+1; index 0 carries the conventional boundary values
    (alpha_bar[0] = 1, posterior_var via alpha_bar[0]), so formulas read
    exactly as written.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    posterior_var: np.ndarray

    def check_step(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ValueError(f"step t={t} out of range [1, {self.T}]")


def build_schedule(T: int, beta_min: float, beta_max: float) -> NoiseSchedule:
    """Linear beta schedule from beta_min to beta_max over T steps."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError(f"need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")
    beta = np.concatenate([[0.0], np.linspace(beta_min, beta_max, T)])
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    posterior_var = np.zeros(T + 1)
    for t in range(1, T + 1):
        posterior_var[t] = beta[t] * (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t])
    return NoiseSchedule(T, beta, alpha, alpha_bar, posterior_var)


def forward_noise(a0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form noising to step t: sqrt(ab_t) a0 + sqrt(1 - ab_t) eps."""
    sched.check_step(t)
    if eps.shape != a0.shape:
        raise ValueError(f"eps shape {eps.shape} != chunk shape {a0.shape}")
    ab = sched.alpha_bar[t]
    return math.sqrt(ab) * a0 + math.sqrt(1.0 - ab) * eps


def predict_noise(den: Denoiser, a_t: np.ndarray, obs: np.ndarray, t: int) -> np.ndarray:
    """Network noise estimate for a single chunk at step t."""
    return den.predict(a_t, obs, t)


def denoise_mean(
    eps_hat: np.ndarray, a_t: np.ndarray, t: int, sched: NoiseSchedule
) -> np.ndarray:
    """Reverse-process mean reconstructed from the predicted noise."""
    sched.check_step(t)
    return (a_t - (sched.beta[t] / math.sqrt(1.0 - sched.alpha_bar[t])) * eps_hat) / math.sqrt(
        sched.alpha[t]
    )


def posterior_mean(
    a0: np.ndarray, a_t: np.ndarray, t: int, sched: NoiseSchedule
) -> np.ndarray:
    """Mean of the forward posterior q(a_{t-1} | a_t, a_0)."""
    sched.check_step(t)
    ab_t = sched.alpha_bar[t]
    ab_prev = sched.alpha_bar[t - 1]
    c0 = math.sqrt(ab_prev) * sched.beta[t] / (1.0 - ab_t)
    ct = math.sqrt(sched.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab_t)
    return c0 * a0 + ct * a_t


def training_loss(
    den: Denoiser,
    obs: np.ndarray,
    a0: np.ndarray,
    sched: NoiseSchedule,
    rng: np.random.Generator,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Noise-prediction MSE and its gradients for one mini-batch.

    Per item: a uniform step t and a standard-normal eps, then
    mean squared error between eps and the network output on the noised
    chunk. Gradients run through the full compute graph by reverse mode.
    """
    b = a0.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    ts = rng.integers(1, sched.T + 1, size=b)
    eps = rng.standard_normal(a0.shape)
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
    d_out = (2.0 / resid.size) * resid
    grads = den.net.backward(cache, d_out)
    return loss, grads


def reverse_sample(
    den: Denoiser, obs: np.ndarray, sched: NoiseSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Ancestral sampling from pure noise down to a clipped action chunk.

    Noise is added with the fixed posterior variance for t > 1 and omitted
    at the final step; the result is clipped to [-1, 1].
    """
    a = rng.standard_normal((den.horizon, den.action_dim))
    for t in range(sched.T, 0, -1):
        eps_hat = den.predict(a, obs, t)
        mean = denoise_mean(eps_hat, a, t, sched)
        if t > 1:
            a = mean + math.sqrt(sched.posterior_var[t]) * rng.standard_normal(a.shape)
        else:
            a = mean
    return np.clip(a, -1.0, 1.0)


def elbo_diagnostic(
    predict_fn,
    obs: np.ndarray,
    a0: np.ndarray,
    sched: NoiseSchedule,
    n_samples: int,
    rng: np.random.Generator,
) -> dict:
    """Per-step KL terms of the variational bound, plus the reconstruction term.

    For t = 2..T the KL between the forward posterior and the model reverse
    step is closed-form for equal fixed variances:
    ||mu_tilde - mu_theta||^2 / (2 var_t), averaged over n_samples noisings.
    The t = 1 term is the Gaussian reconstruction log-likelihood of a0 with
    variance beta_1. Diagnostic only; never a training signal.

    predict_fn(a_t, obs, t) -> eps_hat allows rigged predictors in tests;
    pass a Denoiser-bound closure for the real network.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    kl = np.zeros(sched.T + 1)
    for t in range(2, sched.T + 1):
        acc = 0.0
        for _ in range(n_samples):
            eps = rng.standard_normal(a0.shape)
            a_t = forward_noise(a0, t, eps, sched)
            mu_q = posterior_mean(a0, a_t, t, sched)
            mu_p = denoise_mean(predict_fn(a_t, obs, t), a_t, t, sched)
            acc += float(((mu_q - mu_p) ** 2).sum()) / (2.0 * sched.posterior_var[t])
        kl[t] = acc / n_samples

    recon = 0.0
    var1 = sched.beta[1]
    d = a0.size
    for _ in range(n_samples):
        eps = rng.standard_normal(a0.shape)
        a_1 = forward_noise(a0, 1, eps, sched)
        mu_p = denoise_mean(predict_fn(a_1, obs, 1), a_1, 1, sched)
        recon += -0.5 * (d * math.log(2.0 * math.pi * var1) + float(((a0 - mu_p) ** 2).sum()) / var1)
    recon /= n_samples
    return {"kl_per_t": kl[2:], "reconstruction": recon}


# ---------------------------------------------------------------------------
# Normalization statistics


@dataclass
class NormStats:
    """Per-dimension affine maps taking dataset ranges onto [-1, 1]."""

    action_center: np.ndarray  # (2,)
    action_scale: np.ndarray  # (2,)
    obs_center: np.ndarray  # (d_obs,)
    obs_scale: np.ndarray  # (d_obs,)
    degenerate_action_dims: list[int] = field(default_factory=list)
    degenerate_obs_dims: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if np.any(self.action_scale <= 0) or np.any(self.obs_scale <= 0):
            raise ValueError("normalization scales must be > 0")

    def normalize_actions(self, a: np.ndarray) -> np.ndarray:
        return (a - self.action_center) / self.action_scale

    def denormalize_actions(self, a: np.ndarray) -> np.ndarray:
        return a * self.action_scale + self.action_center

    def normalize_obs(self, obs: np.ndarray) -> np.ndarray:
        return (obs - self.obs_center) / self.obs_scale


def minmax_stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Center/scale mapping [min, max] -> [-1, 1] per column.

    Zero-range columns get unit scale (centered on the constant), and their
    indices are reported as degenerate.
    """
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    center = (hi + lo) / 2.0
    scale = (hi - lo) / 2.0
    degenerate = [int(i) for i in np.flatnonzero(scale == 0.0)]
    scale = np.where(scale == 0.0, 1.0, scale)
    return center, scale, degenerate


# ---------------------------------------------------------------------------
# Checkpoints


@dataclass
class Checkpoint:
    """Self-describing trained policy: net, schedule, normalization, dims."""

    denoiser: Denoiser
    schedule: NoiseSchedule
    norm: NormStats
    n_obs: int
    scan_dim: int
    hidden: list[int]
    schedule_params: tuple[int, float, float]  # (T, beta_min, beta_max)
    config_digest: str
    train_info: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    den = ckpt.denoiser
    T, beta_min, beta_max = ckpt.schedule_params
    obj = {
        "schema_version": SCHEMA_VERSION,
        "kind": CHECKPOINT_KIND,
        "config_digest": ckpt.config_digest,
        "horizon": den.horizon,
        "action_dim": den.action_dim,
        "obs_dim": den.obs_dim,
        "time_dim": den.time_dim,
        "n_obs": ckpt.n_obs,
        "scan_dim": ckpt.scan_dim,
        "hidden": list(ckpt.hidden),
        "layer_sizes": list(den.net.sizes),
        "schedule": {"kind": "linear", "T": T, "beta_min": beta_min, "beta_max": beta_max},
        "norm": {
            "action_center": ckpt.norm.action_center.tolist(),
            "action_scale": ckpt.norm.action_scale.tolist(),
            "obs_center": ckpt.norm.obs_center.tolist(),
            "obs_scale": ckpt.norm.obs_scale.tolist(),
            "degenerate_action_dims": ckpt.norm.degenerate_action_dims,
            "degenerate_obs_dims": ckpt.norm.degenerate_obs_dims,
        },
        "train_info": ckpt.train_info,
        "params": den.net.to_vector().tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, separators=(",", ":"), allow_nan=False)
        f.write("\n")


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("kind") != CHECKPOINT_KIND:
        raise ValueError(f"{path}: not a checkpoint file")
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {obj.get('schema_version')}")

    sizes = list(obj["layer_sizes"])
    net = MLP(sizes, [], [])
    net.weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    net.biases = [np.zeros(b) for b in sizes[1:]]
    net.from_vector(np.asarray(obj["params"], dtype=np.float64))
    den = Denoiser(
        horizon=obj["horizon"],
        action_dim=obj["action_dim"],
        obs_dim=obj["obs_dim"],
        time_dim=obj["time_dim"],
        net=net,
    )
    s = obj["schedule"]
    sched = build_schedule(s["T"], s["beta_min"], s["beta_max"])
    n = obj["norm"]
    norm = NormStats(
        action_center=np.asarray(n["action_center"], dtype=np.float64),
        action_scale=np.asarray(n["action_scale"], dtype=np.float64),
        obs_center=np.asarray(n["obs_center"], dtype=np.float64),
        obs_scale=np.asarray(n["obs_scale"], dtype=np.float64),
        degenerate_action_dims=list(n["degenerate_action_dims"]),
        degenerate_obs_dims=list(n["degenerate_obs_dims"]),
    )
    return Checkpoint(
        denoiser=den,
        schedule=sched,
        norm=norm,
        n_obs=obj["n_obs"],
        scan_dim=obj["scan_dim"],
        hidden=list(obj["hidden"]),
        schedule_params=(s["T"], s["beta_min"], s["beta_max"]),
        config_digest=obj["config_digest"],
        train_info=obj.get("train_info", {}),
    )
