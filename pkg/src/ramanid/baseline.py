"""Baseline estimation for Raman spectra.

Seven estimators are provided: asymmetric least squares, adaptive
iteratively reweighted penalized least squares (airPLS), modified polynomial
fitting, rolling ball, rubber band (lower convex hull), iterative restricted
least squares, and robust local regression. All of them return a
BaselineEstimate; `correct` subtracts the estimate from a spectrum.

The penalized-least-squares family is built on a Whittaker smoother solved
as a pentadiagonal banded Cholesky system, O(n) per smooth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.linalg import solveh_banded
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from ramanid.spectrum import Spectrum


class BaselineError(ValueError):
    """Raised for illegal parameters or singular smoothing systems."""


@dataclass
class BaselineEstimate:
    baseline: np.ndarray
    iterations_used: int
    converged: bool


@lru_cache(maxsize=64)
def _second_diff_penalty_bands(n: int) -> np.ndarray:
    """Upper banded form (3 x n) of D2.T @ D2 for the second-difference matrix D2."""
    d2 = sparse.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n))
    gram = (d2.T @ d2).todia()
    ab = np.zeros((3, n))
    ab[0, 2:] = gram.diagonal(2)
    ab[1, 1:] = gram.diagonal(1)
    ab[2, :] = gram.diagonal(0)
    return ab


def whittaker_smooth(y: np.ndarray, w: np.ndarray, lam: float) -> np.ndarray:
    """Weighted Whittaker smoother with a second-difference roughness penalty.

    Solves (W + lam * D2.T D2) z = W y exactly, where W = diag(w). The system
    is pentadiagonal and symmetric positive definite for any nonnegative
    weight vector that pins down the affine null space of the penalty.

    Args:
        y: signal to smooth, length >= 3.
        w: nonnegative per-point weights, same length as y.
        lam: roughness penalty, > 0. Larger is smoother.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n = y.size
    if n < 3:
        raise BaselineError(f"whittaker smoother needs >= 3 points, got {n}")
    if w.shape != y.shape:
        raise BaselineError(f"weight length {w.size} does not match signal length {n}")
    if np.any(w < 0):
        raise BaselineError("weights must be nonnegative")
    if not lam > 0:
        raise BaselineError(f"penalty must be positive, got {lam}")

    ab = lam * _second_diff_penalty_bands(n)
    ab[2] += w
    try:
        return solveh_banded(ab, w * y, lower=False)
    except np.linalg.LinAlgError as exc:
        raise BaselineError(f"singular smoothing system (weights too sparse): {exc}") from exc


def asym_ls(y: np.ndarray, lam: float = 1e5, p: float = 0.01, max_iter: int = 10) -> BaselineEstimate:
    """Asymmetric least squares baseline.

    Iterates the Whittaker smoother, giving weight p to points above the
    current estimate and 1-p to points below, so peaks barely pull on the
    fit while the baseline regions anchor it.

    Args:
        y: signal, length >= 3.
        lam: roughness penalty.
        p: asymmetry in (0, 1); small values push the baseline under peaks.
        max_iter: reweighting iterations.
    """
    y = np.asarray(y, dtype=float)
    if not 0.0 < p < 1.0:
        raise BaselineError(f"asymmetry p must lie in (0, 1), got {p}")
    w = np.ones(y.size)
    z = y
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        z = whittaker_smooth(y, w, lam)
        new_w = np.where(y > z, p, 1.0 - p)
        if np.array_equal(new_w, w):
            converged = True
            break
        w = new_w
    return BaselineEstimate(baseline=z, iterations_used=iterations, converged=converged)


def airpls(y: np.ndarray, lam: float = 1e5, max_iter: int = 15) -> BaselineEstimate:
    """Adaptive iteratively reweighted penalized least squares baseline.

    At iteration t, points at or above the current estimate get weight zero;
    points below get exp(t * |d_i| / |d-|), where |d-| is the total magnitude
    of negative residuals. Stops once |d-| falls below 0.1% of the signal's
    total magnitude.
    """
    y = np.asarray(y, dtype=float)
    total = np.sum(np.abs(y))
    w = np.ones(y.size)
    z = y
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        z = whittaker_smooth(y, w, lam)
        d = y - z
        negative = d < 0
        neg_sum = np.sum(np.abs(d[negative]))
        if neg_sum == 0.0 or neg_sum < 0.001 * total:
            converged = True
            break
        w = np.zeros(y.size)
        w[negative] = np.exp(iterations * np.abs(d[negative]) / neg_sum)
    return BaselineEstimate(baseline=z, iterations_used=iterations, converged=converged)


def modpoly(y: np.ndarray, degree: int = 5, max_iter: int = 100, tol: float = 1e-3) -> BaselineEstimate:
    """Modified polynomial baseline fit.

    Repeatedly fits a least-squares polynomial to the working signal and
    clips the signal to the fit from above (s <- min(s, f)), so peaks are
    progressively excluded from the fit.
    """
    y = np.asarray(y, dtype=float)
    if degree < 1:
        raise BaselineError(f"polynomial degree must be >= 1, got {degree}")
    if y.size <= degree + 1:
        raise BaselineError(f"degree {degree} too high for {y.size} points")
    if not tol > 0:
        raise BaselineError("tolerance must be positive")

    # fit on [-1, 1] to keep the Vandermonde system well conditioned
    t = np.linspace(-1.0, 1.0, y.size)
    s = y.copy()
    f = s
    scale = max(float(np.linalg.norm(y)), 1e-300)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        f = np.polynomial.Polynomial.fit(t, s, degree)(t)
        s_new = np.minimum(s, f)
        change = float(np.linalg.norm(s_new - s)) / scale
        s = s_new
        if change < tol:
            converged = True
            break
    return BaselineEstimate(baseline=f, iterations_used=iterations, converged=converged)


def rolling_ball(y: np.ndarray, radius: int | None = None) -> BaselineEstimate:
    """Rolling-ball baseline: morphological opening plus a moving-average smooth.

    Erosion (windowed minimum) followed by dilation (windowed maximum) with a
    flat window of half-width `radius`, then a moving average of the same
    width; windows truncate at the array ends. Defaults to radius len(y)//40.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if radius is None:
        radius = max(1, n // 40)
    if radius < 1:
        raise BaselineError(f"radius must be >= 1, got {radius}")
    if n <= 2 * radius:
        raise BaselineError(f"radius {radius} too large for {n} points")

    width = 2 * radius + 1
    # mode="nearest" pads with the edge sample, which is already inside the
    # truncated window, so min/max match truncated-window semantics exactly
    eroded = minimum_filter1d(y, size=width, mode="nearest")
    opened = maximum_filter1d(eroded, size=width, mode="nearest")
    window = np.ones(width)
    baseline = np.convolve(opened, window, mode="same") / np.convolve(
        np.ones(n), window, mode="same"
    )
    return BaselineEstimate(baseline=baseline, iterations_used=1, converged=True)


def rubber_band(y: np.ndarray) -> BaselineEstimate:
    """Rubber-band baseline: the lower convex hull of (i, y_i), interpolated."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        raise BaselineError(f"rubber band needs >= 2 points, got {n}")

    hull: list[int] = []
    for i in range(n):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # pop b unless (a, b, i) makes a strict upward (convex) turn
            if (b - a) * (y[i] - y[a]) - (y[b] - y[a]) * (i - a) > 0:
                break
            hull.pop()
        hull.append(i)
    baseline = np.interp(np.arange(n), hull, y[hull])
    return BaselineEstimate(baseline=baseline, iterations_used=1, converged=True)


def irls_baseline(
    y: np.ndarray, lambda1: float = 1e4, lambda2: float = 1e6, max_iter: int = 20
) -> BaselineEstimate:
    """Iterative restricted least squares baseline.

    Each pass smooths the working signal with the strong penalty lambda2 to
    get a candidate, derives a clearance c = 2 * std of the candidate's
    negative residuals, restricts the working signal to min(y, candidate + c)
    so peaks cannot prop the fit up, and re-smooths with lambda1. Stops when
    the lambda1 baseline changes by less than 1e-6 (relative) or at max_iter.
    """
    y = np.asarray(y, dtype=float)
    ones = np.ones(y.size)
    working = y.copy()
    z = y
    z_prev = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        candidate = whittaker_smooth(working, ones, lambda2)
        residual = y - candidate
        negatives = residual[residual < 0]
        clearance = 2.0 * float(np.std(negatives)) if negatives.size else 0.0
        working = np.minimum(y, candidate + clearance)
        z = whittaker_smooth(working, ones, lambda1)
        if z_prev is not None:
            denom = max(float(np.linalg.norm(z_prev)), 1e-300)
            if float(np.linalg.norm(z - z_prev)) / denom < 1e-6:
                converged = True
                break
        z_prev = z
    return BaselineEstimate(baseline=z, iterations_used=iterations, converged=converged)


def _local_linear_smooth(y: np.ndarray, k: int, robust_w: np.ndarray) -> np.ndarray:
    """Tricube-weighted local linear fit over the k nearest grid points."""
    n = y.size
    half = (k - 1) // 2
    out = np.empty(n)
    for i in range(n):
        lo = min(max(i - half, 0), n - k)
        idx = np.arange(lo, lo + k)
        t = (idx - i).astype(float)
        dist = np.abs(t) / np.max(np.abs(t))
        w = (1.0 - dist**3) ** 3 * robust_w[idx]
        if np.sum(w) <= 0.0:
            w = (1.0 - dist**3) ** 3  # every point down-weighted: fall back to distance weights
        m0 = np.sum(w)
        m1 = np.sum(w * t)
        m2 = np.sum(w * t * t)
        b0 = np.sum(w * y[idx])
        b1 = np.sum(w * t * y[idx])
        det = m0 * m2 - m1 * m1
        if det > 1e-12 * max(m0 * m2, 1e-300):
            out[i] = (m2 * b0 - m1 * b1) / det
        else:
            out[i] = b0 / m0
    return out


def robust_local_regression(y: np.ndarray, span: float = 0.3, max_iter: int = 5) -> BaselineEstimate:
    """Robust local linear regression baseline.

    LOWESS-style local linear fits with tricube distance weights, made
    asymmetric: after each pass, points above the fit get a Tukey bisquare
    weight on residual / (4 * MAD) while points below keep weight 1, so
    upward peaks lose influence but the baseline is never pushed down.

    max_iter counts robustness passes; zero passes is a plain local fit.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if not 0.0 < span <= 1.0:
        raise BaselineError(f"span must lie in (0, 1], got {span}")
    k = int(round(span * n))
    if k < 3:
        raise BaselineError(f"window of {k} points too small (span {span} of {n})")
    if max_iter < 0:
        raise BaselineError("max_iter must be >= 0")
    k = min(k, n)

    fit = _local_linear_smooth(y, k, np.ones(n))
    for _ in range(max_iter):
        r = y - fit
        mad = float(np.median(np.abs(r - np.median(r))))
        # mad can underflow to ~0 on noiseless signals; the division then
        # sends every point above the fit to weight 0, which is exactly the
        # intended outlier treatment, so no special casing is needed
        with np.errstate(divide="ignore", invalid="ignore"):
            u = r / (4.0 * mad)
            bisquare = np.where(np.abs(u) < 1.0, (1.0 - u**2) ** 2, 0.0)
        robust_w = np.where(r > 0, bisquare, 1.0)
        fit = _local_linear_smooth(y, k, robust_w)
    return BaselineEstimate(baseline=fit, iterations_used=max_iter, converged=True)


BASELINE_KINDS = (
    "asym_ls",
    "airpls",
    "modpoly",
    "rolling_ball",
    "rubber_band",
    "irls",
    "robust_lr",
)

_ESTIMATORS = {
    "asym_ls": asym_ls,
    "airpls": airpls,
    "modpoly": modpoly,
    "rolling_ball": rolling_ball,
    "rubber_band": rubber_band,
    "irls": irls_baseline,
    "robust_lr": robust_local_regression,
}


@dataclass(frozen=True)
class BaselineMethod:
    """Named baseline corrector plus parameter overrides.

    Parameters not given fall back to each estimator's defaults.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise BaselineError(f"unknown baseline kind {self.kind!r}; choose from {BASELINE_KINDS}")

    def cache_key(self) -> tuple:
        return (self.kind, tuple(sorted(self.params.items())))


def estimate_baseline(y: np.ndarray, method: BaselineMethod) -> BaselineEstimate:
    """Run the estimator selected by `method` on a plain intensity vector."""
    return _ESTIMATORS[method.kind](np.asarray(y, dtype=float), **method.params)


def correct(s: Spectrum, m: BaselineMethod) -> Spectrum:
    """Subtract the estimated baseline; axis and label are unchanged."""
    estimate = estimate_baseline(s.intensities, m)
    return Spectrum(
        wavenumbers=s.wavenumbers.copy(),
        intensities=s.intensities - estimate.baseline,
        label=s.label,
    )
