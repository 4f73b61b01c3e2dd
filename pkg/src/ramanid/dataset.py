"""Labeled feature datasets, leave-one-out splits, and the on-disk cache."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ramanid.rruff import RruffRecord
from ramanid.spectrum import Grid, SpectrumError, min_max_scale, resample

logger = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1


class DatasetError(ValueError):
    """Raised for empty datasets, unsplittable datasets, or bad cache files."""


@dataclass
class LabeledDataset:
    """Resampled, min-max scaled spectra with integer class labels.

    features has one row per sample (length == grid.points); class_index maps
    rows to class_names; class_counts[c] is the number of rows in class c.
    """

    grid: Grid
    features: np.ndarray
    class_index: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.class_index = np.asarray(self.class_index, dtype=int)
        if self.features.ndim != 2 or self.features.shape[1] != self.grid.points:
            raise DatasetError(
                f"feature matrix must be N x {self.grid.points}, got {self.features.shape}"
            )
        if self.class_index.shape != (self.features.shape[0],):
            raise DatasetError("class_index length must match feature rows")
        if self.features.shape[0] and not (
            0 <= self.class_index.min() and self.class_index.max() < len(self.class_names)
        ):
            raise DatasetError("class_index out of range")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.class_index, minlength=self.n_classes)


@dataclass
class Split:
    """Index partition for one leave-one-out evaluation round."""

    train_indices: np.ndarray
    test_indices: np.ndarray

    def __post_init__(self):
        self.train_indices = np.asarray(self.train_indices, dtype=int)
        self.test_indices = np.asarray(self.test_indices, dtype=int)


@dataclass
class IngestStats:
    kept: int = 0
    skipped: int = 0
    skip_reasons: list[str] = field(default_factory=list)


def build_dataset(
    records: list[RruffRecord], g: Grid, stats: IngestStats | None = None
) -> LabeledDataset:
    """Assemble a LabeledDataset from parsed records.

    Classes are indexed by first appearance of each distinct species name.
    Records that cannot be resampled or scaled (bad axis, constant signal,
    missing species label) are skipped with a logged warning, not fatal.
    """
    stats = stats if stats is not None else IngestStats()
    class_names: list[str] = []
    class_of: dict[str, int] = {}
    rows: list[np.ndarray] = []
    labels: list[int] = []

    for i, record in enumerate(records):
        name = record.label()
        if not name:
            stats.skipped += 1
            stats.skip_reasons.append(f"record {i}: missing species label")
            logger.warning("skipping record %d: missing species label", i)
            continue
        try:
            features = min_max_scale(resample(record.to_spectrum(), g))
        except SpectrumError as exc:
            stats.skipped += 1
            stats.skip_reasons.append(f"record {i} ({name}): {exc}")
            logger.warning("skipping record %d (%s): %s", i, name, exc)
            continue
        if name not in class_of:
            class_of[name] = len(class_names)
            class_names.append(name)
        rows.append(features)
        labels.append(class_of[name])
        stats.kept += 1

    if not rows:
        raise DatasetError("empty dataset: no usable records")
    return LabeledDataset(
        grid=g,
        features=np.stack(rows),
        class_index=np.array(labels),
        class_names=class_names,
    )


def loo_split(d: LabeledDataset, seed: int) -> Split:
    """Per-class leave-one-out split.

    Every class with at least two samples contributes exactly one uniformly
    random member to the test set; everything else (including singleton
    classes, which stay as distractors) trains.
    """
    rng = np.random.default_rng(seed)
    counts = d.class_counts
    if not np.any(counts >= 2):
        raise DatasetError("no testable classes: every class has a single sample")

    test = []
    for c in range(d.n_classes):
        members = np.flatnonzero(d.class_index == c)
        if members.size >= 2:
            test.append(members[rng.integers(members.size)])
    test_indices = np.array(sorted(test), dtype=int)
    mask = np.ones(len(d), dtype=bool)
    mask[test_indices] = False
    return Split(train_indices=np.flatnonzero(mask), test_indices=test_indices)


def subset(d: LabeledDataset, indices: np.ndarray) -> LabeledDataset:
    """Dataset restricted to the given sample indices; class table unchanged."""
    indices = np.asarray(indices, dtype=int)
    return LabeledDataset(
        grid=d.grid,
        features=d.features[indices],
        class_index=d.class_index[indices],
        class_names=list(d.class_names),
    )


def save_dataset(d: LabeledDataset, path) -> None:
    np.savez(
        path,
        format_version=np.int64(CACHE_FORMAT_VERSION),
        grid_start=float(d.grid.start),
        grid_stop=float(d.grid.stop),
        grid_points=np.int64(d.grid.points),
        features=d.features.astype("<f8"),
        class_index=d.class_index.astype("<i8"),
        class_names=np.array(d.class_names, dtype=str),
    )


def load_dataset(path) -> LabeledDataset:
    with np.load(path, allow_pickle=False) as payload:
        try:
            version = int(payload["format_version"])
        except KeyError as exc:
            raise DatasetError(f"{path}: not a dataset cache (missing format_version)") from exc
        if version != CACHE_FORMAT_VERSION:
            raise DatasetError(
                f"{path}: cache format version {version} unsupported "
                f"(expected {CACHE_FORMAT_VERSION})"
            )
        grid = Grid(
            start=float(payload["grid_start"]),
            stop=float(payload["grid_stop"]),
            points=int(payload["grid_points"]),
        )
        return LabeledDataset(
            grid=grid,
            features=payload["features"],
            class_index=payload["class_index"],
            class_names=[str(n) for n in payload["class_names"]],
        )
