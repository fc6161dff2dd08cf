"""Chunking, normalization, optimizer, and gradient-checker tests.

Chunk windows are verified against a direct enumeration oracle; the fitted
loop against determinism and loss-decrease contracts; the finite-difference
checker against a linear network (where both sides are nearly exact), a
small tanh network, and a deliberately corrupted gradient.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from rowturn.demos import DemoMeta, DemoStep, Demonstration
from rowturn.diffusion import build_schedule
from rowturn.nn import Denoiser
from rowturn.training import (
    ChunkedDataset,
    DiffusionConfig,
    TrainConfig,
    chunk_starts,
    cosine_lr,
    finite_diff_gradcheck,
    fit,
    normalize_dataset,
)
from rowturn.world import OK_STATUS, FieldSpec, Pose, RobotState


def _fake_demo(actions: np.ndarray, obs_dim: int) -> Demonstration:
    """Demo scaffold carrying given actions and linearly varying observations."""
    steps = []
    for i, act in enumerate(actions):
        obs = np.full(obs_dim, float(i))
        state = RobotState(Pose(float(i), 0.0, 0.0))
        steps.append(DemoStep(obs, (float(act[0]), float(act[1])), state, OK_STATUS))
    meta = DemoMeta(0, FieldSpec(), Pose(0, 0, 0), "privileged", False, 0, 2)
    return Demonstration(steps, meta)


# ---------------------------------------------------------------------------
# Chunking


def test_chunk_starts_enumeration():
    assert list(chunk_starts(100, 8)) == list(range(0, 100, 8))
    assert len(list(chunk_starts(100, 8))) == 13
    assert list(chunk_starts(16, 16)) == [0]
    assert list(chunk_starts(1, 4)) == [0]


def test_single_chunk_from_exact_length_demo():
    rng = np.random.Generator(np.random.PCG64(0))
    actions = rng.uniform(-1.0, 1.0, size=(16, 2))
    data = normalize_dataset([_fake_demo(actions, 6)], horizon=16, stride=16, n_obs=2, scan_dim=1)
    assert len(data) == 1
    np.testing.assert_allclose(data.norm.denormalize_actions(data.chunks[0]), actions, atol=1e-12)


def test_window_count_and_padding_content():
    rng = np.random.Generator(np.random.PCG64(1))
    actions = rng.uniform(-1.0, 1.0, size=(20, 2))
    data = normalize_dataset([_fake_demo(actions, 6)], horizon=16, stride=4, n_obs=2, scan_dim=1)
    assert len(data) == 5  # starts 0, 4, 8, 12, 16

    # the window at start=16 holds 4 real steps then 12 copies of the final action
    w = data.norm.denormalize_actions(data.chunks[4])
    np.testing.assert_allclose(w[:4], actions[16:20], atol=1e-12)
    np.testing.assert_allclose(w[4:], np.tile(actions[-1], (12, 1)), atol=1e-12)

    # each window's conditioning observation is the one at its start index
    obs4 = data.norm.obs_center + data.obs[4] * data.norm.obs_scale
    np.testing.assert_allclose(obs4, np.full(6, 16.0), atol=1e-12)


def test_constant_action_dim_is_degenerate():
    actions = np.stack([np.linspace(-1, 1, 30), np.zeros(30)], axis=1)
    data = normalize_dataset([_fake_demo(actions, 6)], 16, 4, 2, 1)
    assert data.norm.degenerate_action_dims == [1]
    assert data.norm.action_scale[1] == 1.0
    assert np.all(data.chunks[:, :, 1] == 0.0)


def test_normalized_ranges():
    rng = np.random.Generator(np.random.PCG64(2))
    actions = rng.uniform(-2.0, 2.0, size=(60, 2))
    data = normalize_dataset([_fake_demo(actions, 4)], 16, 4, 1, 2)
    assert data.chunks.min() >= -1.0 - 1e-12 and data.chunks.max() <= 1.0 + 1e-12
    assert data.obs.min() >= -1.0 - 1e-12 and data.obs.max() <= 1.0 + 1e-12


def test_normalize_dataset_validation():
    with pytest.raises(ValueError, match="empty"):
        normalize_dataset([], 16, 4, 2, 1)
    demo = _fake_demo(np.zeros((10, 2)), 6)
    with pytest.raises(ValueError, match="obs dim"):
        normalize_dataset([demo], 16, 4, 2, 5)
    empty = Demonstration([], demo.meta)
    with pytest.raises(ValueError, match="no steps"):
        normalize_dataset([empty], 16, 4, 2, 1)


# ---------------------------------------------------------------------------
# Optimizer


def test_cosine_lr_endpoints():
    assert cosine_lr(0, 100, 1e-3, 1e-5) == pytest.approx(1e-3)
    assert cosine_lr(99, 100, 1e-3, 1e-5) == pytest.approx(1e-5)
    values = [cosine_lr(s, 100, 1e-3, 1e-5) for s in range(100)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert cosine_lr(0, 1, 1e-3, 1e-5) == pytest.approx(1e-3)


def _toy_dataset(n=64, obs_dim=3, horizon=4, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    obs = rng.uniform(-1.0, 1.0, size=(n, obs_dim))
    chunks = np.repeat(np.sign(obs[:, :1]), horizon * 2, axis=1).reshape(n, horizon, 2) * 0.5
    return ChunkedDataset.from_arrays(obs, chunks, n_obs=1, scan_dim=1)


def test_fit_reduces_loss_within_2000_steps(tmp_path):
    """64 pairs, batch 16: 500 epochs = 2000 optimizer steps must cut the
    mean epoch loss below a quarter of its starting value."""
    data = _toy_dataset()
    diff = DiffusionConfig(T=10, beta_min=1e-3, beta_max=0.1, horizon=4, hidden=(32, 32), time_dim=8)
    cfg = TrainConfig(epochs=500, batch_size=16, seed=1)
    log = tmp_path / "log.jsonl"
    ckpt = fit(data, cfg, diff, config_digest="t", log_path=log)

    import json

    rows = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(rows) == 500
    assert rows[0]["epoch"] == 0 and rows[-1]["epoch"] == 499
    assert set(rows[0]) == {"epoch", "step", "loss", "lr", "wall_time"}
    assert rows[-1]["loss"] < 0.25 * rows[0]["loss"]
    assert ckpt.train_info["epochs"] == 500
    assert ckpt.train_info["steps"] == 2000
    assert ckpt.config_digest == "t"
    assert ckpt.denoiser.obs_dim == 3


def test_fit_determinism():
    data = _toy_dataset()
    diff = DiffusionConfig(T=5, beta_min=1e-3, beta_max=0.1, horizon=4, hidden=(16,), time_dim=4)
    cfg = TrainConfig(epochs=3, batch_size=16, seed=7)
    c1 = fit(data, cfg, diff)
    c2 = fit(data, cfg, diff)
    np.testing.assert_array_equal(c1.denoiser.net.to_vector(), c2.denoiser.net.to_vector())
    c3 = fit(data, TrainConfig(epochs=3, batch_size=16, seed=8), diff)
    assert not np.array_equal(c1.denoiser.net.to_vector(), c3.denoiser.net.to_vector())


def test_fit_validation():
    data = _toy_dataset()
    diff = DiffusionConfig(T=5, beta_min=1e-3, beta_max=0.1, horizon=8, hidden=(16,), time_dim=4)
    with pytest.raises(ValueError, match="horizon"):
        fit(data, TrainConfig(epochs=1), diff)
    with pytest.raises(ValueError, match="epochs"):
        TrainConfig(epochs=0).validate()
    with pytest.raises(ValueError, match="T must"):
        DiffusionConfig(T=0).validate()
    with pytest.raises(ValueError, match="time_dim"):
        DiffusionConfig(time_dim=7).validate()


# ---------------------------------------------------------------------------
# Gradient checker


def _check_setup(hidden, seed=0, horizon=3, obs_dim=2, batch=4):
    rng = np.random.Generator(np.random.PCG64(seed))
    den = Denoiser.create(horizon, obs_dim, hidden, time_dim=4, rng=rng)
    sched = build_schedule(5, 1e-3, 0.1)
    obs = rng.uniform(-1.0, 1.0, size=(batch, obs_dim))
    a0 = rng.uniform(-1.0, 1.0, size=(batch, horizon, 2))
    return den, obs, a0, sched


def test_gradcheck_linear_network():
    """With no hidden layer the loss is exactly quadratic, so central
    differences have zero truncation error; only rounding noise of order
    eps/h remains, which a larger probe step drives below 1e-6."""
    den, obs, a0, sched = _check_setup(hidden=[])
    assert finite_diff_gradcheck(den, obs, a0, sched, h=1e-4) < 1e-6


def test_gradcheck_small_tanh_network():
    den, obs, a0, sched = _check_setup(hidden=[16, 16])
    assert den.net.n_params <= 5000
    assert finite_diff_gradcheck(den, obs, a0, sched, h=1e-5) < 1e-4


def test_gradcheck_catches_corrupted_gradient():
    den, obs, a0, sched = _check_setup(hidden=[8])
    bad = np.ones(den.net.n_params)  # nothing like the true gradient
    assert finite_diff_gradcheck(den, obs, a0, sched, grad_override=bad) > 1e-2


def test_gradcheck_restores_parameters():
    den, obs, a0, sched = _check_setup(hidden=[8])
    before = den.net.to_vector()
    finite_diff_gradcheck(den, obs, a0, sched)
    np.testing.assert_array_equal(den.net.to_vector(), before)


def test_gradcheck_rejects_large_networks():
    rng = np.random.Generator(np.random.PCG64(0))
    den = Denoiser.create(16, 100, [128, 128], 16, rng)
    sched = build_schedule(5, 1e-3, 0.1)
    with pytest.raises(ValueError, match="1e4 parameters"):
        finite_diff_gradcheck(den, np.zeros((1, 100)), np.zeros((1, 16, 2)), sched)


def test_gradcheck_deterministic():
    den, obs, a0, sched = _check_setup(hidden=[8])
    r1 = finite_diff_gradcheck(den, obs, a0, sched, seed=3)
    r2 = finite_diff_gradcheck(den, obs, a0, sched, seed=3)
    assert r1 == r2
