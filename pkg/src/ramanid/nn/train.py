"""Training loop: stratified validation split, augmented epochs, early stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ramanid.augment import AugmentConfig, augment_dataset
from ramanid.dataset import LabeledDataset, subset
from ramanid.nn.adam import adam_step, init_adam_state
from ramanid.nn.loss import one_hot, weighted_loss_from_logits
from ramanid.nn.model import Model, predict_proba, rank_classes


class TrainError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    init_std: float = math.sqrt(0.05)
    early_stop_patience: int = 10
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "learning_rate", "beta1", "beta2", "epsilon", "batch_size", "init_std"):
            if getattr(self, name) <= 0:
                raise TrainError(f"{name} must be positive")
        if self.early_stop_patience < 0:
            raise TrainError("early_stop_patience must be >= 0")
        if not 0.0 < self.validation_fraction < 0.5:
            raise TrainError("validation_fraction must lie in (0, 0.5)")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = float("nan")
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def stratified_validation_split(
    class_index: np.ndarray, fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Hold out floor(fraction * count) members per class; never empties a class."""
    train: list[int] = []
    val: list[int] = []
    for c in np.unique(class_index):
        members = np.flatnonzero(class_index == c)
        members = rng.permutation(members)
        n_val = int(fraction * members.size)
        val.extend(members[:n_val])
        train.extend(members[n_val:])
    return np.array(sorted(train), dtype=int), np.array(sorted(val), dtype=int)


def _batches(n: int, batch_size: int, order: np.ndarray):
    """Contiguous slices of a permutation; a trailing singleton merges backward
    so batch normalization always sees at least two samples."""
    edges = list(range(0, n, batch_size))
    for i, start in enumerate(edges):
        stop = min(start + batch_size, n)
        if i + 1 == len(edges) - 1 and n - edges[-1] == 1:
            yield order[start : n]
            return
        yield order[start:stop]


def train(
    model: Model,
    dataset: LabeledDataset,
    cfg: TrainConfig,
    augment_cfg: AugmentConfig | None = None,
) -> TrainHistory:
    """Train in place; returns per-epoch history.

    A stratified validation slice is carved from `dataset` before any
    augmentation, so validation sees only untouched samples. Validation
    top-1 accuracy drives early stopping, and the best-scoring parameters
    (batch-norm statistics included) are restored at the end. With no
    validation samples available, training simply runs all epochs.
    """
    if len(dataset) == 0:
        raise TrainError("empty dataset")
    if model.n_classes < 2:
        raise TrainError("training needs at least 2 classes")
    if dataset.n_classes != model.n_classes:
        raise TrainError(
            f"dataset has {dataset.n_classes} classes but model expects {model.n_classes}"
        )

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = stratified_validation_split(
        dataset.class_index, cfg.validation_fraction, rng
    )
    train_ds = subset(dataset, train_idx)
    if augment_cfg is not None:
        train_ds = augment_dataset(train_ds, augment_cfg)
    val_features = dataset.features[val_idx]
    val_truth = dataset.class_index[val_idx]

    features = train_ds.features
    labels = one_hot(train_ds.class_index, model.n_classes)
    counts = train_ds.class_counts
    n = len(train_ds)
    if n < 2:
        raise TrainError(f"only {n} training samples after the validation split")

    params = model.parameters()
    adam = init_adam_state(params)
    history = TrainHistory()
    best_snapshot: list[np.ndarray] | None = None
    epochs_since_best = 0

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch in _batches(n, cfg.batch_size, order):
            logits = model.forward_logits(features[batch], train=True, rng=rng)
            loss, grad = weighted_loss_from_logits(logits, labels[batch], counts)
            model.backward_from_logits(grad)
            adam_step(
                params,
                model.gradients(),
                adam,
                learning_rate=cfg.learning_rate,
                beta1=cfg.beta1,
                beta2=cfg.beta2,
                epsilon=cfg.epsilon,
            )
            epoch_loss += loss * batch.size
        history.train_loss.append(epoch_loss / n)

        if val_idx.size:
            probs = predict_proba(model, val_features)
            top1 = rank_classes(probs)[:, 0]
            accuracy = float(np.mean(top1 == val_truth))
            history.val_accuracy.append(accuracy)
            improved = history.best_epoch < 0 or accuracy > history.best_val_accuracy
            if improved or accuracy == history.best_val_accuracy:
                # ties refresh the snapshot: among equally accurate epochs the
                # later one has seen more optimization and sharper probabilities
                history.best_epoch = len(history.train_loss) - 1
                history.best_val_accuracy = accuracy
                best_snapshot = [a.copy() for a in model.state_arrays()]
            if improved:
                epochs_since_best = 0
            else:
                epochs_since_best += 1
                if epochs_since_best > cfg.early_stop_patience:
                    history.stopped_early = True
                    break

    if best_snapshot is not None:
        for current, best in zip(model.state_arrays(), best_snapshot):
            current[...] = best
    return history
