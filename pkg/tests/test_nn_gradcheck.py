"""Analytic backward passes vs central finite differences, layer by layer and end to end."""

import numpy as np
import pytest
from gradcheck import fd_gradcheck

from ramanid.nn.layers import BatchNorm, Conv1d, Dense, Dropout, LeakyReLU, MaxPool1d, Tanh
from ramanid.nn.loss import one_hot, weighted_loss_from_logits
from ramanid.nn.model import ArchSpec, ConvSpec, build_model

TINY_ARCH = ArchSpec(
    conv=(ConvSpec(4, 5, 2), ConvSpec(8, 3, 2)),
    dense_width=16,
    dropout_rate=0.0,
)

N_DRAWS = 25  # the acceptance suite reruns these checks at 100 draws


def projected_loss(out, proj):
    return float(np.sum(out * proj))


@pytest.mark.parametrize("draw", range(N_DRAWS))
def test_conv_layer_gradients(draw):
    rng = np.random.default_rng(1000 + draw)
    layer = Conv1d(rng.normal(size=(3, 2, 5)), rng.normal(size=3))
    x = rng.normal(size=(2, 2, 9))
    proj = rng.normal(size=(2, 3, 9))

    out = layer.forward(x)
    dx = layer.backward(proj)
    fd_gradcheck(
        lambda: projected_loss(layer.forward(x), proj),
        [x, layer.kernels, layer.bias],
        [dx, layer.grad_kernels, layer.grad_bias],
        rng,
    )


@pytest.mark.parametrize("draw", range(N_DRAWS))
def test_leaky_relu_gradients(draw):
    rng = np.random.default_rng(2000 + draw)
    act = LeakyReLU(0.1)
    x = rng.normal(size=(3, 2, 7))
    proj = rng.normal(size=(3, 2, 7))
    act.forward(x)
    dx = act.backward(proj)
    fd_gradcheck(lambda: projected_loss(act.forward(x), proj), [x], [dx], rng)


@pytest.mark.parametrize("draw", range(N_DRAWS))
def test_maxpool_gradients(draw):
    rng = np.random.default_rng(3000 + draw)
    pool = MaxPool1d(2)
    x = rng.normal(size=(2, 3, 9))  # ragged: exercises the replicate pad
    proj = rng.normal(size=(2, 3, 5))
    pool.forward(x)
    dx = pool.backward(proj)
    fd_gradcheck(lambda: projected_loss(pool.forward(x), proj), [x], [dx], rng)


@pytest.mark.parametrize("kind,shape", [("conv", (4, 3, 6)), ("dense", (8, 5))])
@pytest.mark.parametrize("draw", range(N_DRAWS // 5))
def test_batchnorm_gradients(kind, shape, draw):
    rng = np.random.default_rng(4000 + draw)
    norm = BatchNorm(shape[1], kind=kind)
    norm.gamma = rng.uniform(0.5, 1.5, shape[1])
    norm.beta = rng.normal(size=shape[1])
    x = rng.normal(size=shape) * 2.0
    proj = rng.normal(size=shape)

    def loss():
        saved = (norm.running_mean.copy(), norm.running_var.copy())
        out = norm.forward(x, train=True)
        norm.running_mean, norm.running_var = saved  # keep probes side-effect free
        return projected_loss(out, proj)

    norm.forward(x, train=True)
    dx = norm.backward(proj)
    fd_gradcheck(loss, [x, norm.gamma, norm.beta], [dx, norm.grad_gamma, norm.grad_beta], rng)


@pytest.mark.parametrize("draw", range(N_DRAWS))
def test_dense_and_tanh_gradients(draw):
    rng = np.random.default_rng(5000 + draw)
    dense = Dense(rng.normal(size=(4, 6)), rng.normal(size=4))
    act = Tanh()
    x = rng.normal(size=(3, 6))
    proj = rng.normal(size=(3, 4))

    def loss():
        return projected_loss(act.forward(dense.forward(x)), proj)

    loss()
    dx = dense.backward(act.backward(proj))
    fd_gradcheck(
        loss, [x, dense.weights, dense.bias], [dx, dense.grad_weights, dense.grad_bias], rng
    )


@pytest.mark.parametrize("draw", range(N_DRAWS // 5))
def test_dropout_gradients_with_frozen_mask(draw):
    rng = np.random.default_rng(6000 + draw)
    drop = Dropout(0.5)
    x = rng.normal(size=(4, 10))
    proj = rng.normal(size=(4, 10))
    mask = (rng.random(x.shape) >= 0.5) / 0.5

    def loss():
        return projected_loss(drop.forward(x, train=True, mask=mask), proj)

    loss()
    dx = drop.backward(proj)
    fd_gradcheck(loss, [x], [dx], rng)


@pytest.mark.parametrize("draw", range(N_DRAWS))
def test_softmax_cross_entropy_logit_gradients(draw):
    rng = np.random.default_rng(7000 + draw)
    logits = rng.normal(size=(5, 4)) * 3.0
    labels = one_hot(rng.integers(0, 4, size=5), 4)
    counts = rng.integers(1, 6, size=4)

    def loss():
        return weighted_loss_from_logits(logits, labels, counts)[0]

    _, grad = weighted_loss_from_logits(logits, labels, counts)
    fd_gradcheck(loss, [logits], [grad], rng, coords_per_array=12)


def tiny_model_and_batch(seed):
    rng = np.random.default_rng(seed)
    model = build_model(32, 3, arch=TINY_ARCH, seed=seed)
    x = rng.random((4, 32))
    labels = one_hot(rng.integers(0, 3, size=4), 3)
    counts = np.array([2, 1, 1])
    return model, x, labels, counts


@pytest.mark.parametrize("draw", range(10))
def test_full_tiny_model_gradients(draw):
    model, x, labels, counts = tiny_model_and_batch(8000 + draw)
    rng = np.random.default_rng(9000 + draw)

    def loss():
        saved = [a.copy() for a in model.state_arrays()]
        logits = model.forward_logits(x, train=True)
        value = weighted_loss_from_logits(logits, labels, counts)[0]
        for current, backup in zip(model.state_arrays(), saved):
            current[...] = backup  # probes must not drift the running stats
        return value

    logits = model.forward_logits(x, train=True)
    _, grad_logits = weighted_loss_from_logits(logits, labels, counts)
    dx = model.backward_from_logits(grad_logits)
    fd_gradcheck(
        loss,
        [x] + model.parameters(),
        [dx] + model.gradients(),
        rng,
        coords_per_array=4,
    )


def test_zero_weight_batch_produces_zero_gradients():
    model, x, labels, _ = tiny_model_and_batch(123)
    counts = np.array([0, 0, 7])  # every sample's class has synthetic count 0
    labels = one_hot(np.array([0, 1, 0, 1]), 3)
    logits = model.forward_logits(x, train=True)
    loss, grad_logits = weighted_loss_from_logits(logits, labels, counts)
    model.backward_from_logits(grad_logits)
    assert loss == 0.0
    for grad in model.gradients():
        assert np.all(grad == 0.0)


def test_duplicated_sample_doubles_its_additive_contribution():
    rng = np.random.default_rng(77)
    logits_ab = rng.normal(size=(2, 3))
    logits_abb = np.vstack([logits_ab, logits_ab[1]])
    labels_ab = one_hot(np.array([0, 1]), 3)
    labels_abb = one_hot(np.array([0, 1, 1]), 3)
    counts = np.array([3, 2, 4])

    _, g_ab = weighted_loss_from_logits(logits_ab, labels_ab, counts)
    _, g_abb = weighted_loss_from_logits(logits_abb, labels_abb, counts)

    # un-normalized per-sample contributions are unchanged by duplication,
    # so the duplicated sample contributes exactly twice in the sum
    assert np.allclose(3 * g_abb[0], 2 * g_ab[0])
    assert np.allclose(3 * g_abb[1], 2 * g_ab[1])
    assert np.allclose(g_abb[2], g_abb[1])
