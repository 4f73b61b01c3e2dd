"""Conventional matchers: PCA reduction, nearest neighbor, correlation, linear SVM.

Every predictor returns a full descending-preference ordering over classes so
top-k accuracy is well defined; ties always break toward the lower class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ClassicError(ValueError):
    pass


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, dim), orthonormal rows
    explained_variance: np.ndarray  # descending eigenvalues

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(x: np.ndarray, retained: float = 0.999) -> PcaModel:
    """Principal components keeping the smallest count reaching `retained` variance.

    Uses the D x D covariance eigenproblem when D <= N and the N x N Gram
    trick otherwise, so both wide spectra matrices and small sample sets are
    cheap.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ClassicError("PCA needs a 2-D matrix with at least 2 rows")
    if not 0.0 < retained <= 1.0:
        raise ClassicError(f"retained variance must lie in (0, 1], got {retained}")
    n, dim = x.shape
    mean = x.mean(axis=0)
    centered = x - mean

    if dim <= n:
        cov = centered.T @ centered / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        eigvals = eigvals[order]
        components = eigvecs[:, order].T
    else:
        gram = centered @ centered.T / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1]
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
        keep = eigvals > 0
        components = (centered.T @ eigvecs[:, keep]).T / np.sqrt(
            (n - 1) * eigvals[keep]
        )[:, None]
        eigvals = eigvals[keep]

    eigvals = np.clip(eigvals, 0.0, None)
    total = eigvals.sum()
    if total <= 0.0:
        raise ClassicError("rank-0 data: all rows identical")
    positive = eigvals > total * 1e-12
    eigvals = eigvals[positive]
    components = components[: eigvals.size]
    ratios = np.cumsum(eigvals) / total
    count = int(np.searchsorted(ratios, retained - 1e-12) + 1)
    count = min(count, eigvals.size)
    return PcaModel(mean=mean, components=components[:count], explained_variance=eigvals[:count])


def pca_project(m: PcaModel, x: np.ndarray) -> np.ndarray:
    """Coordinates of (x - mean) along the retained components; x may be batched."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.mean.size:
        raise ClassicError(f"dimension mismatch: {x.shape[-1]} vs {m.mean.size}")
    return (x - m.mean) @ m.components.T


@dataclass
class ReferenceLibrary:
    features: np.ndarray
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.shape[0] != self.labels.size:
            raise ClassicError("feature row count must match label count")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _order_by_score(scores: np.ndarray, descending: bool) -> np.ndarray:
    """Stable argsort so equal scores favor the lower class index."""
    return np.argsort(-scores if descending else scores, kind="stable")


def knn_predict(lib: ReferenceLibrary, x: np.ndarray, k: int = 1) -> np.ndarray:
    """Rank classes by the Euclidean distance of their closest member.

    Equal distances break toward the lower class index. Restricting a class's
    candidates to the k nearest references overall cannot reorder classes (a
    class absent from the top k has a best distance no smaller than any class
    inside it), so the ranking is the same for every k.
    """
    if k < 1:
        raise ClassicError(f"k must be >= 1, got {k}")
    if lib.features.shape[0] == 0:
        raise ClassicError("empty reference library")
    x = np.asarray(x, dtype=float)
    if x.shape != (lib.features.shape[1],):
        raise ClassicError(f"query dimension {x.shape} vs library {lib.features.shape[1]}")

    distances = np.linalg.norm(lib.features - x, axis=1)
    best = np.full(lib.n_classes, np.inf)
    np.minimum.at(best, lib.labels, distances)
    return _order_by_score(best, descending=False)


def correlation_predict(lib: ReferenceLibrary, x: np.ndarray) -> np.ndarray:
    """Rank classes by their best member's Pearson correlation with the query."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lib.features.shape[1],):
        raise ClassicError(f"query dimension {x.shape} vs library {lib.features.shape[1]}")
    xc = x - x.mean()
    x_norm = np.linalg.norm(xc)
    if x_norm == 0.0:
        raise ClassicError("constant query has no defined correlation")
    refs = lib.features - lib.features.mean(axis=1, keepdims=True)
    ref_norms = np.linalg.norm(refs, axis=1)
    if np.any(ref_norms == 0.0):
        raise ClassicError("constant reference spectrum has no defined correlation")
    corr = refs @ xc / (ref_norms * x_norm)
    best = np.full(lib.n_classes, -np.inf)
    np.maximum.at(best, lib.labels, corr)
    return _order_by_score(best, descending=True)


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (K, dim)
    biases: np.ndarray  # (K,)
    class_names: list[str]


def linear_svm_train(
    x: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    epochs: int = 30,
    lr: float = 1.0,
    reg: float = 1e-4,
    seed: int = 0,
    class_names: list[str] | None = None,
) -> LinearSvmModel:
    """One-vs-rest linear SVMs by subgradient descent on L2-regularized hinge loss.

    Steps decay like lr / (1 + lr * reg * t) so the weight shrink factor stays
    inside (0, 1) for any regularization strength; the bias is unregularized.
    Deterministic for a fixed seed.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if num_classes < 2:
        raise ClassicError("linear SVM needs at least 2 classes")
    if np.unique(labels).size < 2:
        raise ClassicError("single-class data cannot be separated")
    if class_names is None:
        class_names = [str(i) for i in range(num_classes)]

    n, dim = x.shape
    weights = np.zeros((num_classes, dim))
    biases = np.zeros(num_classes)
    rng = np.random.default_rng(seed)

    for c in range(num_classes):
        sign = np.where(labels == c, 1.0, -1.0)
        w = weights[c]
        b = 0.0
        t = 0
        for _ in range(epochs):
            for i in rng.permutation(n):
                t += 1
                eta = lr / (1.0 + lr * reg * t)
                margin = sign[i] * (w @ x[i] + b)
                w *= 1.0 - eta * reg
                if margin < 1.0:
                    w += eta * sign[i] * x[i]
                    b += eta * sign[i]
        weights[c] = w
        biases[c] = b
    return LinearSvmModel(weights=weights, biases=biases, class_names=class_names)


def svm_predict(model: LinearSvmModel, x: np.ndarray) -> np.ndarray:
    """Rank classes by decision value w . x + b, descending."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.weights.shape[1],):
        raise ClassicError(f"query dimension {x.shape} vs model {model.weights.shape[1]}")
    scores = model.weights @ x + model.biases
    return _order_by_score(scores, descending=True)
