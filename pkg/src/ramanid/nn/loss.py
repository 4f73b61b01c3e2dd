"""Class-weighted cross-entropy.

Per-sample weights are inversely proportional to the size of the sample's
class, normalized so that perfectly balanced classes give every sample
weight 1 (reducing the loss to plain mean cross-entropy).
"""

from __future__ import annotations

import numpy as np

from ramanid.nn.layers import ShapeError, softmax

LOG_FLOOR = 1e-12


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def class_weights(class_counts: np.ndarray) -> np.ndarray:
    """Per-class weight (total / K) / count_c; empty classes get weight 0."""
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    k = counts.size
    weights = np.zeros(k)
    nonzero = counts > 0
    weights[nonzero] = (total / k) / counts[nonzero]
    return weights


def weighted_loss(
    predictions: np.ndarray, labels: np.ndarray, class_counts: np.ndarray
) -> float:
    """Mean over samples of alpha_n * cross-entropy, log clamped at 1e-12."""
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape:
        raise ShapeError(f"predictions {predictions.shape} vs labels {labels.shape}")
    if predictions.shape[1] != np.asarray(class_counts).size:
        raise ShapeError("class_counts length must equal the class dimension")
    alpha = labels @ class_weights(class_counts)
    per_sample = -(labels * np.log(np.maximum(predictions, LOG_FLOOR))).sum(axis=1)
    return float(np.mean(alpha * per_sample))


def weighted_loss_from_logits(
    logits: np.ndarray, labels: np.ndarray, class_counts: np.ndarray
) -> tuple[float, np.ndarray]:
    """Loss plus its exact gradient w.r.t. the logits.

    The softmax/cross-entropy pair collapses to alpha_n * (p - t) / N, which
    sidesteps the numerically hostile d(log p)/d(logit) route.
    """
    probs = softmax(logits)
    labels = np.asarray(labels, dtype=float)
    loss = weighted_loss(probs, labels, class_counts)
    alpha = labels @ class_weights(class_counts)
    grad = alpha[:, None] * (probs - labels) / logits.shape[0]
    return loss, grad
