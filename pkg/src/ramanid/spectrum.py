"""Core signal types: spectra, uniform grids, resampling and intensity scaling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SpectrumError(ValueError):
    """Raised for malformed spectra or degenerate intensity vectors."""


@dataclass(frozen=True)
class Grid:
    """Uniform wavenumber grid, in cm^-1."""

    start: float
    stop: float
    points: int

    def __post_init__(self):
        if not self.start < self.stop:
            raise SpectrumError(f"grid start must be below stop, got [{self.start}, {self.stop}]")
        if self.points < 2:
            raise SpectrumError(f"grid needs at least 2 points, got {self.points}")

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.points - 1)

    def wavenumbers(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


# Covers the common Raman fingerprint region; power-of-two length keeps the
# conv/pool pyramid arithmetic clean.
DEFAULT_GRID = Grid(start=100.0, stop=1900.0, points=1024)


@dataclass
class Spectrum:
    """A single spectrum: strictly ascending wavenumber axis plus intensities."""

    wavenumbers: np.ndarray
    intensities: np.ndarray
    label: str | None = field(default=None)

    def __post_init__(self):
        self.wavenumbers = np.asarray(self.wavenumbers, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.wavenumbers.ndim != 1 or self.intensities.ndim != 1:
            raise SpectrumError("wavenumbers and intensities must be 1-D")
        if self.wavenumbers.shape != self.intensities.shape:
            raise SpectrumError(
                f"axis/intensity length mismatch: {self.wavenumbers.size} vs {self.intensities.size}"
            )
        if self.wavenumbers.size < 2:
            raise SpectrumError("a spectrum needs at least 2 samples")
        if not np.all(np.isfinite(self.wavenumbers)):
            raise SpectrumError("non-finite wavenumber values")
        if not np.all(np.isfinite(self.intensities)):
            raise SpectrumError("non-finite intensity values")
        if not np.all(np.diff(self.wavenumbers) > 0):
            raise SpectrumError("wavenumber axis must be strictly increasing")

    def __len__(self) -> int:
        return int(self.wavenumbers.size)


def resample(s: Spectrum, g: Grid) -> np.ndarray:
    """Linearly interpolate a spectrum onto a uniform grid.

    Grid points outside the spectrum's axis range are set to 0 rather than
    extrapolated; fluorescence baselines make extrapolated intensities
    meaningless.
    """
    target = g.wavenumbers()
    out = np.interp(target, s.wavenumbers, s.intensities)
    inside = (target >= s.wavenumbers[0]) & (target <= s.wavenumbers[-1])
    out[~inside] = 0.0
    return out


def normalize_max(x: np.ndarray) -> np.ndarray:
    """Scale intensities so the maximum equals 1."""
    x = np.asarray(x, dtype=float)
    peak = np.max(np.abs(x))
    if peak == 0.0:
        raise SpectrumError("cannot normalize an all-zero spectrum")
    return x / np.max(x)


def min_max_scale(x: np.ndarray) -> np.ndarray:
    """Affinely map intensities onto [0, 1]."""
    x = np.asarray(x, dtype=float)
    lo, hi = np.min(x), np.max(x)
    if hi <= lo:
        raise SpectrumError("cannot min-max scale a constant spectrum")
    return (x - lo) / (hi - lo)
