import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ramanid.spectrum import Grid, Spectrum, SpectrumError, min_max_scale, normalize_max, resample


def test_grid_step_and_axis():
    g = Grid(0.0, 10.0, 11)
    assert g.step == 1.0
    assert np.allclose(g.wavenumbers(), np.arange(11.0))


@pytest.mark.parametrize("start,stop,points", [(5.0, 5.0, 10), (9.0, 2.0, 10), (0.0, 1.0, 1)])
def test_grid_rejects_bad_parameters(start, stop, points):
    with pytest.raises(SpectrumError):
        Grid(start, stop, points)


def test_spectrum_invariants():
    with pytest.raises(SpectrumError):
        Spectrum([1.0, 1.0, 2.0], [0.0, 1.0, 2.0])  # not strictly increasing
    with pytest.raises(SpectrumError):
        Spectrum([1.0, 2.0], [0.0])  # length mismatch
    with pytest.raises(SpectrumError):
        Spectrum([1.0], [0.0])  # too short
    with pytest.raises(SpectrumError):
        Spectrum([1.0, 2.0], [np.nan, 0.0])


def test_resample_identity_on_matching_grid():
    g = Grid(0.0, 10.0, 11)
    s = Spectrum(g.wavenumbers(), np.arange(11.0) ** 2)
    assert np.array_equal(resample(s, g), s.intensities)


def test_resample_linear_interpolation_exact_on_ramp():
    s = Spectrum(np.arange(11.0), np.arange(11.0))
    g = Grid(2.5, 2.5 + 1.0, 2)
    out = resample(s, g)
    assert out[0] == pytest.approx(2.5)


def test_resample_zero_outside_source_axis():
    s = Spectrum(np.arange(11.0), np.ones(11))
    g = Grid(0.0, 12.0, 13)
    out = resample(s, g)
    assert np.all(out[:11] == 1.0)
    assert np.all(out[11:] == 0.0)


@given(
    a=st.floats(-5, 5),
    b=st.floats(-2, 2),
    start=st.floats(1.0, 3.0),
    width=st.floats(0.5, 4.0),
)
@settings(max_examples=50)
def test_resample_exact_for_affine_intensities(a, b, start, width):
    axis = np.linspace(0.0, 10.0, 37)
    s = Spectrum(axis, a + b * axis)
    g = Grid(start, start + width, 17)
    expected = a + b * g.wavenumbers()
    assert np.allclose(resample(s, g), expected, atol=1e-9)


def test_resample_idempotent_on_same_grid():
    rng = np.random.default_rng(0)
    g = Grid(100.0, 500.0, 64)
    s = Spectrum(np.linspace(90.0, 510.0, 200), rng.random(200))
    once = resample(s, g)
    twice = resample(Spectrum(g.wavenumbers(), once), g)
    assert np.array_equal(once, twice)


def test_normalize_max_basic_cases():
    assert np.allclose(normalize_max(np.array([2.0, 4.0, 8.0])), [0.25, 0.5, 1.0])
    assert np.array_equal(normalize_max(np.ones(5)), np.ones(5))
    assert np.allclose(normalize_max(np.array([0.0, 0.0, 5.0])), [0.0, 0.0, 1.0])


def test_normalize_max_rejects_all_zero():
    with pytest.raises(SpectrumError):
        normalize_max(np.zeros(4))


@given(scale=st.floats(1e-3, 1e3))
@settings(max_examples=50)
def test_normalize_max_scale_invariance(scale):
    x = np.array([0.5, 2.0, -1.0, 3.0])
    assert np.allclose(normalize_max(scale * x), normalize_max(x))


def test_min_max_scale_cases():
    assert np.allclose(min_max_scale(np.array([-1.0, 0.0, 1.0])), [0.0, 0.5, 1.0])
    already = np.array([0.0, 0.25, 1.0])
    assert np.allclose(min_max_scale(already), already)
    assert np.allclose(min_max_scale(np.array([10.0, 30.0])), [0.0, 1.0])


def test_min_max_scale_rejects_constant():
    with pytest.raises(SpectrumError):
        min_max_scale(np.full(6, 2.5))


@given(scale=st.floats(1e-3, 1e3))
@settings(max_examples=50)
def test_min_max_scale_invariant_under_positive_rescaling(scale):
    # downstream consequence: classifier rankings cannot depend on the
    # detector's arbitrary intensity units
    x = np.array([0.1, 0.9, 0.4, 0.0, 1.3])
    assert np.allclose(min_max_scale(scale * x), min_max_scale(x), atol=1e-12)
