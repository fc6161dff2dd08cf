"""Network forward/backward, parameter flattening, and time-embedding tests.

The forward pass is pinned to a hand-computed example; gradients are checked
directly against central differences on a tiny network (the full parameter-
by-parameter sweep lives with the training tests).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from rowturn.nn import MLP, Denoiser, time_embedding


def _tiny_net():
    """1-2-1 net with fixed weights for hand computation."""
    net = MLP.create([1, 2, 1], np.random.Generator(np.random.PCG64(0)))
    net.weights[0] = np.array([[0.5, -1.0]])
    net.biases[0] = np.array([0.1, 0.2])
    net.weights[1] = np.array([[2.0], [-3.0]])
    net.biases[1] = np.array([0.25])
    return net


def test_forward_hand_computed():
    net = _tiny_net()
    x = np.array([[0.4]])
    out, acts = net.forward(x)
    h1 = math.tanh(0.4 * 0.5 + 0.1)
    h2 = math.tanh(0.4 * -1.0 + 0.2)
    expected = 2.0 * h1 - 3.0 * h2 + 0.25
    assert out[0, 0] == pytest.approx(expected, abs=1e-12)
    assert len(acts) == 2 and acts[0] is x


def test_forward_shape_check():
    net = _tiny_net()
    with pytest.raises(ValueError, match="incompatible"):
        net.forward(np.zeros((3, 2)))
    with pytest.raises(ValueError, match="incompatible"):
        net.forward(np.zeros(1))


def test_forward_does_not_mutate_input():
    net = _tiny_net()
    x = np.array([[0.4], [0.7]])
    x_copy = x.copy()
    net.forward(x)
    np.testing.assert_array_equal(x, x_copy)


def test_zero_weights_give_zero_output():
    rng = np.random.Generator(np.random.PCG64(1))
    net = MLP.create([3, 4, 2], rng)
    net.from_vector(np.zeros(net.n_params))
    out, _ = net.forward(np.ones((5, 3)))
    np.testing.assert_array_equal(out, np.zeros((5, 2)))


def test_vector_round_trip():
    rng = np.random.Generator(np.random.PCG64(2))
    net = MLP.create([3, 5, 4, 2], rng)
    vec = net.to_vector()
    assert vec.size == net.n_params == 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2
    other = MLP.create([3, 5, 4, 2], np.random.Generator(np.random.PCG64(99)))
    other.from_vector(vec)
    np.testing.assert_array_equal(other.to_vector(), vec)
    x = rng.standard_normal((4, 3))
    np.testing.assert_array_equal(net.forward(x)[0], other.forward(x)[0])

    with pytest.raises(ValueError, match="parameter count"):
        net.from_vector(np.zeros(3))


def test_backward_matches_finite_differences():
    """Direct check on a small net: d(sum of outputs)/d(theta)."""
    rng = np.random.Generator(np.random.PCG64(3))
    net = MLP.create([2, 3, 2], rng)
    x = rng.standard_normal((4, 2))

    out, acts = net.forward(x)
    grads = net.backward(acts, np.ones_like(out))
    g = MLP.grads_to_vector(grads)
    assert g.size == net.n_params

    theta = net.to_vector()
    h = 1e-6
    for i in range(net.n_params):
        probe = theta.copy()
        probe[i] += h
        net.from_vector(probe)
        lp = net.forward(x)[0].sum()
        probe[i] = theta[i] - h
        net.from_vector(probe)
        lm = net.forward(x)[0].sum()
        fd = (lp - lm) / (2 * h)
        assert g[i] == pytest.approx(fd, abs=1e-6)


def test_grads_layout_matches_param_layout():
    """grads_to_vector must flatten in exactly the to_vector order."""
    rng = np.random.Generator(np.random.PCG64(4))
    net = MLP.create([2, 3, 1], rng)
    x = rng.standard_normal((1, 2))
    out, acts = net.forward(x)
    g = MLP.grads_to_vector(net.backward(acts, np.ones_like(out)))

    # bump the single parameter with the largest gradient and confirm the
    # output moves by g[i] * h -- would fail under any layout permutation
    i = int(np.argmax(np.abs(g)))
    theta = net.to_vector()
    h = 1e-7
    theta[i] += h
    net.from_vector(theta)
    moved = net.forward(x)[0].sum()
    assert moved - out.sum() == pytest.approx(g[i] * h, rel=1e-4)


def test_create_validates_sizes():
    with pytest.raises(ValueError, match="at least"):
        MLP.create([3], np.random.Generator(np.random.PCG64(0)))


# ---------------------------------------------------------------------------
# Time embedding


def test_time_embedding_values():
    emb = time_embedding(np.array([0]), 4)
    np.testing.assert_allclose(emb, [[0.0, 0.0, 1.0, 1.0]], atol=1e-15)
    emb1 = time_embedding(np.array([1]), 4)
    assert emb1[0, 0] == pytest.approx(math.sin(1.0))
    assert emb1[0, 1] == pytest.approx(math.sin(1e-4))  # lowest frequency is 1/10^4
    assert emb1[0, 2] == pytest.approx(math.cos(1.0))


def test_time_embedding_shape_and_parity():
    assert time_embedding(np.arange(5), 16).shape == (5, 16)
    with pytest.raises(ValueError, match="even"):
        time_embedding(np.array([1]), 7)


def test_time_embedding_distinguishes_steps():
    emb = time_embedding(np.arange(1, 51), 16)
    d = np.linalg.norm(emb[:, None, :] - emb[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-3  # no two steps collide


# ---------------------------------------------------------------------------
# Denoiser assembly


def test_denoiser_input_assembly():
    rng = np.random.Generator(np.random.PCG64(5))
    den = Denoiser.create(horizon=3, obs_dim=4, hidden=[8], time_dim=6, rng=rng)
    a = rng.standard_normal((2, 3, 2))
    obs = rng.standard_normal((2, 4))
    t = np.array([1, 2])
    x = den.assemble_input(a, obs, t)
    assert x.shape == (2, 3 * 2 + 4 + 6)
    np.testing.assert_array_equal(x[:, :6], a.reshape(2, -1))
    np.testing.assert_array_equal(x[:, 6:10], obs)
    np.testing.assert_array_equal(x[:, 10:], time_embedding(t, 6))


def test_denoiser_shape_errors():
    rng = np.random.Generator(np.random.PCG64(6))
    den = Denoiser.create(horizon=3, obs_dim=4, hidden=[8], time_dim=6, rng=rng)
    with pytest.raises(ValueError, match="chunk shape"):
        den.assemble_input(np.zeros((2, 4, 2)), np.zeros((2, 4)), np.array([1, 1]))
    with pytest.raises(ValueError, match="obs shape"):
        den.assemble_input(np.zeros((2, 3, 2)), np.zeros((2, 5)), np.array([1, 1]))


def test_denoiser_predict_deterministic():
    rng = np.random.Generator(np.random.PCG64(7))
    den = Denoiser.create(horizon=3, obs_dim=4, hidden=[8], time_dim=6, rng=rng)
    a = rng.standard_normal((3, 2))
    obs = rng.standard_normal(4)
    out1 = den.predict(a, obs, 2)
    out2 = den.predict(a, obs, 2)
    assert out1.shape == (3, 2)
    np.testing.assert_array_equal(out1, out2)
