"""From-scratch 1D convolutional network: layers, loss, optimizer, training."""

from ramanid.nn.adam import AdamState, adam_step, init_adam_state
from ramanid.nn.layers import (
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    LeakyReLU,
    MaxPool1d,
    ShapeError,
    Tanh,
    leaky_relu,
    leaky_relu_grad,
    softmax,
)
from ramanid.nn.loss import class_weights, one_hot, weighted_loss, weighted_loss_from_logits
from ramanid.nn.model import (
    DEFAULT_ARCH,
    ArchSpec,
    ConvSpec,
    Model,
    ModelError,
    build_model,
    conv_chain_lengths,
    load_model,
    predict,
    predict_proba,
    rank_classes,
    save_model,
)
from ramanid.nn.train import TrainConfig, TrainError, TrainHistory, stratified_validation_split, train

__all__ = [
    "AdamState",
    "ArchSpec",
    "BatchNorm",
    "Conv1d",
    "ConvSpec",
    "DEFAULT_ARCH",
    "Dense",
    "Dropout",
    "LeakyReLU",
    "MaxPool1d",
    "Model",
    "ModelError",
    "ShapeError",
    "Tanh",
    "TrainConfig",
    "TrainError",
    "TrainHistory",
    "adam_step",
    "build_model",
    "class_weights",
    "conv_chain_lengths",
    "init_adam_state",
    "leaky_relu",
    "leaky_relu_grad",
    "load_model",
    "one_hot",
    "predict",
    "predict_proba",
    "rank_classes",
    "save_model",
    "softmax",
    "stratified_validation_split",
    "train",
    "weighted_loss",
    "weighted_loss_from_logits",
]
