"""Hand-rolled network layers with exact analytic backward passes.

Shape conventions: convolutional feature maps are (batch, channels, length)
arrays; dense activations are (batch, features). Every layer caches what its
backward pass needs during forward; backward returns the gradient w.r.t. the
layer input and stores parameter gradients on the layer.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    pass


def leaky_relu(x: np.ndarray, a: float) -> np.ndarray:
    """x for positive inputs, a*x otherwise (0 < a < 1)."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"leaky slope must lie in (0, 1), got {a}")
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, a * x)


def leaky_relu_grad(x: np.ndarray, a: float) -> np.ndarray:
    """Subgradient: 1 where x > 0, a elsewhere (including x == 0)."""
    return np.where(np.asarray(x) > 0, 1.0, a)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    z = np.asarray(z, dtype=float)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


class Conv1d:
    """Multi-channel 1D cross-correlation with same-length zero padding."""

    def __init__(self, kernels: np.ndarray, bias: np.ndarray):
        kernels = np.asarray(kernels, dtype=float)
        bias = np.asarray(bias, dtype=float)
        if kernels.ndim != 3:
            raise ShapeError("kernels must be (out_channels, in_channels, width)")
        if kernels.shape[2] % 2 == 0:
            raise ShapeError(f"kernel width must be odd, got {kernels.shape[2]}")
        if bias.shape != (kernels.shape[0],):
            raise ShapeError("bias length must equal out_channels")
        self.kernels = kernels
        self.bias = bias
        self.grad_kernels = np.zeros_like(kernels)
        self.grad_bias = np.zeros_like(bias)
        self._windows = None

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]

    @property
    def width(self) -> int:
        return self.kernels.shape[2]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"expected (batch, {self.in_channels}, length) input, got {x.shape}"
            )
        if x.shape[2] < self.width:
            raise ShapeError(f"input length {x.shape[2]} below kernel width {self.width}")
        pad = self.width // 2
        xpad = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        self._windows = sliding_window_view(xpad, self.width, axis=2)
        return np.einsum("bclw,jcw->bjl", self._windows, self.kernels) + self.bias[None, :, None]

    def backward(self, g: np.ndarray) -> np.ndarray:
        if self._windows is None:
            raise RuntimeError("backward called before forward")
        self.grad_kernels = np.einsum("bjl,bclw->jcw", g, self._windows)
        self.grad_bias = g.sum(axis=(0, 2))
        batch, _, length = g.shape
        pad = self.width // 2
        dxpad = np.zeros((batch, self.in_channels, length + 2 * pad))
        for m in range(self.width):
            dxpad[:, :, m : m + length] += np.einsum("bjl,jc->bcl", g, self.kernels[:, :, m])
        return dxpad[:, :, pad : pad + length]

    def parameters(self):
        return [self.kernels, self.bias]

    def gradients(self):
        return [self.grad_kernels, self.grad_bias]


class LeakyReLU:
    def __init__(self, slope: float):
        if not 0.0 < slope < 1.0:
            raise ValueError(f"leaky slope must lie in (0, 1), got {slope}")
        self.slope = slope
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return np.where(x > 0, x, self.slope * x)

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g * leaky_relu_grad(self._x, self.slope)


class MaxPool1d:
    """Non-overlapping max pooling; a ragged tail is replicate-padded."""

    def __init__(self, pool: int):
        if pool < 1:
            raise ValueError(f"pool width must be >= 1, got {pool}")
        self.pool = pool
        self._argmax = None
        self._in_length = 0
        self._padded = 0

    @staticmethod
    def output_length(length: int, pool: int) -> int:
        return -(-length // pool)

    def forward(self, x: np.ndarray) -> np.ndarray:
        s = self.pool
        self._in_length = x.shape[2]
        if s == 1:
            self._argmax = None
            return x
        remainder = x.shape[2] % s
        if remainder:
            tail = np.repeat(x[:, :, -1:], s - remainder, axis=2)
            x = np.concatenate([x, tail], axis=2)
        self._padded = x.shape[2]
        blocks = x.reshape(x.shape[0], x.shape[1], -1, s)
        # first-occurrence argmax: replicated tail values can never win a tie
        # against the real last sample, so gradients always land in-range
        self._argmax = blocks.argmax(axis=3)
        return np.take_along_axis(blocks, self._argmax[..., None], axis=3)[..., 0]

    def backward(self, g: np.ndarray) -> np.ndarray:
        if self.pool == 1:
            return g
        batch, channels, out_length = g.shape
        dblocks = np.zeros((batch, channels, out_length, self.pool))
        np.put_along_axis(dblocks, self._argmax[..., None], g[..., None], axis=3)
        return dblocks.reshape(batch, channels, self._padded)[:, :, : self._in_length]


class BatchNorm:
    """Batch normalization over (batch,) for dense inputs or (batch, length) per channel.

    Training mode standardizes by batch statistics and refreshes running
    statistics with momentum 0.9; inference mode applies the running ones.
    """

    EPS = 1e-5
    MOMENTUM = 0.9

    def __init__(self, size: int, kind: str):
        if kind not in ("conv", "dense"):
            raise ValueError(f"kind must be conv or dense, got {kind!r}")
        self.kind = kind
        self.gamma = np.ones(size)
        self.beta = np.zeros(size)
        self.running_mean = np.zeros(size)
        self.running_var = np.ones(size)
        self.grad_gamma = np.zeros(size)
        self.grad_beta = np.zeros(size)
        self._axes = (0, 2) if kind == "conv" else (0,)
        self._xhat = None
        self._inv_std = None
        self._count = 0

    def _expand(self, v: np.ndarray) -> np.ndarray:
        return v[None, :, None] if self.kind == "conv" else v[None, :]

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if train:
            if x.shape[0] < 2:
                raise ShapeError("batch normalization needs a batch of at least 2 in training")
            mean = x.mean(axis=self._axes)
            var = x.var(axis=self._axes)
            self._inv_std = 1.0 / np.sqrt(var + self.EPS)
            self._xhat = (x - self._expand(mean)) * self._expand(self._inv_std)
            self._count = x.shape[0] if self.kind == "dense" else x.shape[0] * x.shape[2]
            self.running_mean = self.MOMENTUM * self.running_mean + (1 - self.MOMENTUM) * mean
            self.running_var = self.MOMENTUM * self.running_var + (1 - self.MOMENTUM) * var
            return self._expand(self.gamma) * self._xhat + self._expand(self.beta)
        xhat = (x - self._expand(self.running_mean)) / np.sqrt(
            self._expand(self.running_var) + self.EPS
        )
        return self._expand(self.gamma) * xhat + self._expand(self.beta)

    def backward(self, g: np.ndarray) -> np.ndarray:
        xhat, m = self._xhat, self._count
        self.grad_gamma = (g * xhat).sum(axis=self._axes)
        self.grad_beta = g.sum(axis=self._axes)
        dxhat = g * self._expand(self.gamma)
        sum_dxhat = self._expand(dxhat.sum(axis=self._axes))
        sum_dxhat_xhat = self._expand((dxhat * xhat).sum(axis=self._axes))
        return (self._expand(self._inv_std) / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)

    def parameters(self):
        return [self.gamma, self.beta]

    def gradients(self):
        return [self.grad_gamma, self.grad_beta]

    def state(self):
        return [self.running_mean, self.running_var]


class Dense:
    """Affine map: x @ W.T + b with W of shape (out, in)."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.asarray(weights, dtype=float)
        bias = np.asarray(bias, dtype=float)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ShapeError("weights must be (out, in) with matching bias")
        self.weights = weights
        self.bias = bias
        self.grad_weights = np.zeros_like(weights)
        self.grad_bias = np.zeros_like(bias)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
            raise ShapeError(f"expected (batch, {self.weights.shape[1]}) input, got {x.shape}")
        self._x = x
        return x @ self.weights.T + self.bias

    def backward(self, g: np.ndarray) -> np.ndarray:
        self.grad_weights = g.T @ self._x
        self.grad_bias = g.sum(axis=0)
        return g @ self.weights

    def parameters(self):
        return [self.weights, self.bias]

    def gradients(self):
        return [self.grad_weights, self.grad_bias]


class Tanh:
    def __init__(self):
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._out = np.tanh(x)
        return self._out

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g * (1.0 - self._out**2)


class Dropout:
    """Inverted dropout: train-time scaling so inference is a plain pass-through."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(
        self,
        x: np.ndarray,
        train: bool,
        rng: np.random.Generator | None = None,
        mask: np.ndarray | None = None,
    ) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if mask is None:
            if rng is None:
                raise ValueError("training-mode dropout needs an rng")
            mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        self._mask = mask
        return x * mask

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g if self._mask is None else g * self._mask
