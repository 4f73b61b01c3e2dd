"""Model assembly, forward/backward chaining, prediction, and persistence.

The default architecture is a pyramid of six conv blocks (conv -> batch norm
-> leaky ReLU -> max pool) that halves a 1024-point input down to length 16
while growing channels, followed by a tanh hidden layer with dropout and a
softmax output layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ramanid.nn.layers import (
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    LeakyReLU,
    MaxPool1d,
    ShapeError,
    Tanh,
    softmax,
)
from ramanid.spectrum import Grid

MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    channels: int
    kernel_width: int
    pool: int


@dataclass(frozen=True)
class ArchSpec:
    conv: tuple[ConvSpec, ...]
    dense_width: int = 512
    dropout_rate: float = 0.5
    leaky_slope: float = 0.1


DEFAULT_ARCH = ArchSpec(
    conv=(
        ConvSpec(16, 21, 2),
        ConvSpec(32, 11, 2),
        ConvSpec(64, 5, 2),
        ConvSpec(64, 5, 2),
        ConvSpec(64, 5, 2),
        ConvSpec(64, 5, 2),
    ),
    dense_width=512,
    dropout_rate=0.5,
)


class ConvBlock:
    """conv -> batch norm (pre-activation) -> leaky ReLU -> max pool."""

    def __init__(self, conv: Conv1d, norm: BatchNorm, slope: float, pool: int):
        self.conv = conv
        self.norm = norm
        self.act = LeakyReLU(slope)
        self.pool = MaxPool1d(pool)

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        return self.pool.forward(self.act.forward(self.norm.forward(self.conv.forward(x), train)))

    def backward(self, g: np.ndarray) -> np.ndarray:
        return self.conv.backward(self.norm.backward(self.act.backward(self.pool.backward(g))))

    def parameters(self):
        return self.conv.parameters() + self.norm.parameters()

    def gradients(self):
        return self.conv.gradients() + self.norm.gradients()

    def state(self):
        return self.norm.state()


class Model:
    """Stateful network: conv pyramid, hidden tanh layer, softmax output."""

    def __init__(
        self,
        grid_points: int,
        class_names: list[str],
        arch: ArchSpec,
        blocks: list[ConvBlock],
        hidden: Dense,
        hidden_norm: BatchNorm,
        output: Dense,
        grid: Grid | None = None,
    ):
        self.grid_points = grid_points
        self.class_names = list(class_names)
        self.arch = arch
        self.blocks = blocks
        self.hidden = hidden
        self.hidden_norm = hidden_norm
        self.hidden_act = Tanh()
        self.dropout = Dropout(arch.dropout_rate)
        self.output = output
        self.grid = grid

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def forward_logits(
        self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.grid_points:
            raise ShapeError(f"expected (batch, {self.grid_points}) input, got {x.shape}")
        maps = x[:, None, :]
        for block in self.blocks:
            maps = block.forward(maps, train)
        flat = maps.reshape(maps.shape[0], -1)
        self._conv_out_shape = maps.shape
        hidden = self.hidden_act.forward(self.hidden_norm.forward(self.hidden.forward(flat), train))
        hidden = self.dropout.forward(hidden, train, rng)
        return self.output.forward(hidden)

    def backward_from_logits(self, grad_logits: np.ndarray) -> np.ndarray:
        g = self.output.backward(grad_logits)
        g = self.dropout.backward(g)
        g = self.hidden.backward(self.hidden_norm.backward(self.hidden_act.backward(g)))
        g = g.reshape(self._conv_out_shape)
        for block in reversed(self.blocks):
            g = block.backward(g)
        return g[:, 0, :]

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for block in self.blocks:
            params.extend(block.parameters())
        params.extend(self.hidden.parameters())
        params.extend(self.hidden_norm.parameters())
        params.extend(self.output.parameters())
        return params

    def gradients(self) -> list[np.ndarray]:
        grads: list[np.ndarray] = []
        for block in self.blocks:
            grads.extend(block.gradients())
        grads.extend(self.hidden.gradients())
        grads.extend(self.hidden_norm.gradients())
        grads.extend(self.output.gradients())
        return grads

    def state_arrays(self) -> list[np.ndarray]:
        """Parameters plus batch-norm running statistics, for snapshot/restore."""
        arrays = self.parameters()
        for block in self.blocks:
            arrays.extend(block.state())
        arrays.extend(self.hidden_norm.state())
        return arrays


def conv_chain_lengths(grid_points: int, arch: ArchSpec) -> list[int]:
    """Feature-map length after each block; raises if any conv would underflow."""
    lengths = []
    length = grid_points
    for i, spec in enumerate(arch.conv):
        if length < spec.kernel_width:
            raise ModelError(
                f"block {i}: length {length} below kernel width {spec.kernel_width}; "
                "grid too small for this pool chain"
            )
        length = MaxPool1d.output_length(length, spec.pool)
        lengths.append(length)
    return lengths


def build_model(
    grid_points: int,
    num_classes: int,
    arch: ArchSpec = DEFAULT_ARCH,
    seed: int = 0,
    init_std: float = math.sqrt(0.05),
    class_names: list[str] | None = None,
    grid: Grid | None = None,
) -> Model:
    """Construct a model with Gaussian(0, init_std^2) weights, zero biases.

    class_names defaults to stringified indices when only a count is known.
    """
    if num_classes < 1:
        raise ModelError(f"need at least 1 class, got {num_classes}")
    if class_names is None:
        class_names = [str(i) for i in range(num_classes)]
    if len(class_names) != num_classes:
        raise ModelError("class_names length must equal num_classes")
    for spec in arch.conv:
        if spec.kernel_width % 2 == 0 or spec.kernel_width < 1:
            raise ModelError(f"kernel widths must be odd and positive, got {spec.kernel_width}")
        if spec.pool < 1 or spec.channels < 1:
            raise ModelError("pool widths and channel counts must be >= 1")
    lengths = conv_chain_lengths(grid_points, arch)

    rng = np.random.default_rng(seed)
    blocks = []
    in_channels = 1
    for spec in arch.conv:
        kernels = rng.normal(0.0, init_std, size=(spec.channels, in_channels, spec.kernel_width))
        conv = Conv1d(kernels, np.zeros(spec.channels))
        norm = BatchNorm(spec.channels, kind="conv")
        blocks.append(ConvBlock(conv, norm, arch.leaky_slope, spec.pool))
        in_channels = spec.channels

    flat_dim = in_channels * lengths[-1]
    hidden = Dense(
        rng.normal(0.0, init_std, size=(arch.dense_width, flat_dim)), np.zeros(arch.dense_width)
    )
    hidden_norm = BatchNorm(arch.dense_width, kind="dense")
    output = Dense(
        rng.normal(0.0, init_std, size=(num_classes, arch.dense_width)), np.zeros(num_classes)
    )
    return Model(grid_points, class_names, arch, blocks, hidden, hidden_norm, output, grid=grid)


def predict(model: Model, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inference on one feature vector: (probabilities, ranked class indices).

    Ranking ties break toward the lower class index.
    """
    features = np.asarray(features, dtype=float)
    if features.shape != (model.grid_points,):
        raise ShapeError(f"expected {model.grid_points} features, got shape {features.shape}")
    probs = predict_proba(model, features[None, :])[0]
    ranking = np.argsort(-probs, kind="stable")
    return probs, ranking


def predict_proba(model: Model, features: np.ndarray) -> np.ndarray:
    """Inference-mode class probabilities for a batch of feature rows."""
    return softmax(model.forward_logits(features, train=False))


def rank_classes(probs: np.ndarray) -> np.ndarray:
    """Descending-probability class order per row, stable in class index."""
    return np.argsort(-probs, axis=-1, kind="stable")


def save_model(model: Model, path) -> None:
    """Persist everything needed to reload and run the model.

    All tensors are stored as little-endian 64-bit floats.
    """
    if model.grid is None:
        raise ModelError("model has no grid attached; set model.grid before saving")
    payload: dict[str, np.ndarray] = {
        "format_version": np.int64(MODEL_FORMAT_VERSION),
        "grid_start": np.float64(model.grid.start),
        "grid_stop": np.float64(model.grid.stop),
        "grid_points": np.int64(model.grid.points),
        "class_names": np.array(model.class_names, dtype=str),
        "conv_channels": np.array([s.channels for s in model.arch.conv], dtype="<i8"),
        "conv_widths": np.array([s.kernel_width for s in model.arch.conv], dtype="<i8"),
        "conv_pools": np.array([s.pool for s in model.arch.conv], dtype="<i8"),
        "dense_width": np.int64(model.arch.dense_width),
        "dropout_rate": np.float64(model.arch.dropout_rate),
        "leaky_slope": np.float64(model.arch.leaky_slope),
    }
    for i, block in enumerate(model.blocks):
        payload[f"conv{i}_kernels"] = block.conv.kernels.astype("<f8")
        payload[f"conv{i}_bias"] = block.conv.bias.astype("<f8")
        payload[f"conv{i}_gamma"] = block.norm.gamma.astype("<f8")
        payload[f"conv{i}_beta"] = block.norm.beta.astype("<f8")
        payload[f"conv{i}_running_mean"] = block.norm.running_mean.astype("<f8")
        payload[f"conv{i}_running_var"] = block.norm.running_var.astype("<f8")
    payload["hidden_weights"] = model.hidden.weights.astype("<f8")
    payload["hidden_bias"] = model.hidden.bias.astype("<f8")
    payload["hidden_gamma"] = model.hidden_norm.gamma.astype("<f8")
    payload["hidden_beta"] = model.hidden_norm.beta.astype("<f8")
    payload["hidden_running_mean"] = model.hidden_norm.running_mean.astype("<f8")
    payload["hidden_running_var"] = model.hidden_norm.running_var.astype("<f8")
    payload["output_weights"] = model.output.weights.astype("<f8")
    payload["output_bias"] = model.output.bias.astype("<f8")
    np.savez(path, **payload)


def load_model(path) -> Model:
    """Reload a saved model, validating version and the full shape chain."""
    with np.load(path, allow_pickle=False) as payload:
        try:
            version = int(payload["format_version"])
        except KeyError as exc:
            raise ModelError(f"{path}: not a model file (missing format_version)") from exc
        if version != MODEL_FORMAT_VERSION:
            raise ModelError(
                f"{path}: model format version {version} unsupported (expected {MODEL_FORMAT_VERSION})"
            )
        grid = Grid(
            start=float(payload["grid_start"]),
            stop=float(payload["grid_stop"]),
            points=int(payload["grid_points"]),
        )
        class_names = [str(n) for n in payload["class_names"]]
        arch = ArchSpec(
            conv=tuple(
                ConvSpec(int(c), int(w), int(p))
                for c, w, p in zip(
                    payload["conv_channels"], payload["conv_widths"], payload["conv_pools"]
                )
            ),
            dense_width=int(payload["dense_width"]),
            dropout_rate=float(payload["dropout_rate"]),
            leaky_slope=float(payload["leaky_slope"]),
        )
        model = build_model(
            grid.points, len(class_names), arch, seed=0, class_names=class_names, grid=grid
        )

        def take(name: str, expected_shape: tuple) -> np.ndarray:
            try:
                value = np.asarray(payload[name], dtype=float)
            except KeyError as exc:
                raise ModelError(f"{path}: missing tensor {name!r}") from exc
            if value.shape != expected_shape:
                raise ModelError(
                    f"{path}: tensor {name!r} has shape {value.shape}, expected {expected_shape}"
                )
            return value

        for i, block in enumerate(model.blocks):
            block.conv.kernels = take(f"conv{i}_kernels", block.conv.kernels.shape)
            block.conv.bias = take(f"conv{i}_bias", block.conv.bias.shape)
            block.norm.gamma = take(f"conv{i}_gamma", block.norm.gamma.shape)
            block.norm.beta = take(f"conv{i}_beta", block.norm.beta.shape)
            block.norm.running_mean = take(f"conv{i}_running_mean", block.norm.running_mean.shape)
            block.norm.running_var = take(f"conv{i}_running_var", block.norm.running_var.shape)
        model.hidden.weights = take("hidden_weights", model.hidden.weights.shape)
        model.hidden.bias = take("hidden_bias", model.hidden.bias.shape)
        model.hidden_norm.gamma = take("hidden_gamma", model.hidden_norm.gamma.shape)
        model.hidden_norm.beta = take("hidden_beta", model.hidden_norm.beta.shape)
        model.hidden_norm.running_mean = take("hidden_running_mean", model.hidden_norm.running_mean.shape)
        model.hidden_norm.running_var = take("hidden_running_var", model.hidden_norm.running_var.shape)
        model.output.weights = take("output_weights", model.output.weights.shape)
        model.output.bias = take("output_bias", model.output.bias.shape)
    return model
