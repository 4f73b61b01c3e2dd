"""Raman spectrum identification toolkit.

A from-scratch 1D convolutional network trained directly on raw,
baseline-distorted spectra, alongside the classical pipeline it is measured
against: seven baseline correctors feeding PCA/KNN/correlation/SVM matchers,
all evaluated under a per-class leave-one-out protocol with top-k scoring.
"""

from ramanid.spectrum import DEFAULT_GRID, Grid, Spectrum, SpectrumError, min_max_scale, normalize_max, resample

__all__ = [
    "DEFAULT_GRID",
    "Grid",
    "Spectrum",
    "SpectrumError",
    "min_max_scale",
    "normalize_max",
    "resample",
]

__version__ = "0.1.0"
