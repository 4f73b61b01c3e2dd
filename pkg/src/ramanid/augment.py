"""Training-set augmentation: index shifts, proportional noise, within-class mixes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ramanid.dataset import LabeledDataset


class AugmentError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    """Augmentation recipe.

    copies_per_sample shifted/noised variants are added per original sample,
    plus mixes_per_class convex combinations for every class that has at
    least two samples. Originals are always retained.
    """

    max_shift: int = 3
    noise_scale: float = 0.05
    mixes_per_class: int = 2
    copies_per_sample: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.max_shift < 0:
            raise AugmentError("max_shift must be >= 0")
        if self.noise_scale < 0:
            raise AugmentError("noise_scale must be >= 0")
        if self.mixes_per_class < 0 or self.copies_per_sample < 0:
            raise AugmentError("augmentation counts must be >= 0")


def shift(x: np.ndarray, offset: int) -> np.ndarray:
    """Shift a vector by `offset` indices, padding vacated slots with the edge value."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if abs(offset) >= n:
        raise AugmentError(f"|offset| {abs(offset)} must be below length {n}")
    if offset == 0:
        return x.copy()
    out = np.empty_like(x)
    if offset > 0:
        out[offset:] = x[:-offset]
        out[:offset] = x[0]
    else:
        out[:offset] = x[-offset:]
        out[offset:] = x[-1]
    return out


def proportional_noise(x: np.ndarray, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    """Multiply each point by (1 + noise_scale * standard normal draw)."""
    x = np.asarray(x, dtype=float)
    if noise_scale < 0:
        raise AugmentError("noise_scale must be >= 0")
    return x * (1.0 + noise_scale * rng.standard_normal(x.size))


def mix(spectra: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Random convex combination of same-length spectra.

    Coefficients are independent uniform(0, 1) draws normalized to sum 1,
    which keeps the result inside the pointwise envelope of its inputs.
    """
    if len(spectra) < 2:
        raise AugmentError(f"mix needs >= 2 spectra, got {len(spectra)}")
    arrays = [np.asarray(s, dtype=float) for s in spectra]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise AugmentError("mix inputs must share one length")
    coeffs = rng.uniform(0.0, 1.0, size=len(arrays))
    coeffs /= coeffs.sum()
    return np.einsum("i,ij->j", coeffs, np.stack(arrays))


def augment_dataset(d: LabeledDataset, cfg: AugmentConfig) -> LabeledDataset:
    """Expand a dataset per the config; deterministic for a fixed seed.

    Output size is N * (1 + copies_per_sample) plus mixes_per_class for each
    class with >= 2 samples. Labels never change.
    """
    rng = np.random.default_rng(cfg.seed)
    rows = [d.features]
    labels = [d.class_index]

    if cfg.copies_per_sample > 0:
        for i in range(len(d)):
            for _ in range(cfg.copies_per_sample):
                offset = int(rng.integers(-cfg.max_shift, cfg.max_shift + 1))
                variant = proportional_noise(shift(d.features[i], offset), cfg.noise_scale, rng)
                rows.append(variant[None, :])
                labels.append(d.class_index[i : i + 1])

    if cfg.mixes_per_class > 0:
        counts = d.class_counts
        for c in range(d.n_classes):
            if counts[c] < 2:
                continue
            members = [d.features[i] for i in np.flatnonzero(d.class_index == c)]
            for _ in range(cfg.mixes_per_class):
                rows.append(mix(members, rng)[None, :])
                labels.append(np.array([c]))

    return LabeledDataset(
        grid=d.grid,
        features=np.concatenate(rows, axis=0),
        class_index=np.concatenate(labels),
        class_names=list(d.class_names),
    )
