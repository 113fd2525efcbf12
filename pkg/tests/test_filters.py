import numpy as np
import pytest

from accpulse.filters import (ECG_FEATURE_FILTER, QRS_FILTER, FilterSpec,
                              butterworth_bandpass, design)
from scipy import signal as sps

from oracles import butterworth_bandpass_gain

FS = 250.0


@pytest.mark.parametrize("spec", [QRS_FILTER, ECG_FEATURE_FILTER])
def test_design_matches_analytic_magnitude(spec):
    f = np.linspace(0.1, 124.0, 400)
    _, h = sps.sosfreqz(design(spec), worN=f, fs=FS)
    expected = butterworth_bandpass_gain(f, spec.low_hz, spec.high_hz, FS, spec.order)
    np.testing.assert_allclose(np.abs(h), expected, rtol=1e-6, atol=1e-9)


def test_dc_is_removed():
    out = butterworth_bandpass(np.full(5000, 2.0), ECG_FEATURE_FILTER)
    assert np.max(np.abs(out[1000:-1000])) < 1e-3 * 2.0


def test_on_band_sine_preserved():
    t = np.arange(5000) / FS
    out = butterworth_bandpass(np.sin(2 * np.pi * 10.0 * t), ECG_FEATURE_FILTER)
    amp = np.max(np.abs(out[1000:-1000]))
    assert abs(amp - 1.0) < 0.05


def test_60hz_attenuated_20db():
    t = np.arange(5000) / FS
    out = butterworth_bandpass(np.sin(2 * np.pi * 60.0 * t), ECG_FEATURE_FILTER)
    mid = slice(1000, 4000)
    basis = np.column_stack([np.sin(2 * np.pi * 60.0 * t[mid]), np.cos(2 * np.pi * 60.0 * t[mid])])
    coef, *_ = np.linalg.lstsq(basis, out[mid], rcond=None)
    amp = float(np.hypot(*coef))
    assert 20 * np.log10(amp) <= -20.0
    # forward-backward response is the squared single-pass gain
    g = butterworth_bandpass_gain(60.0, 0.8, 30.0, FS) ** 2
    assert abs(amp - g) < 0.01 * g + 1e-6


def test_zero_phase_symmetric_pulse():
    x = np.zeros(1001)
    t = (np.arange(1001) - 500) / FS
    x += np.exp(-0.5 * (t / 0.01) ** 2)
    y = butterworth_bandpass(x, QRS_FILTER)
    assert abs(int(np.argmax(y)) - 500) <= 1
    np.testing.assert_allclose(y[400:501], y[600:499:-1], atol=1e-3 * np.max(np.abs(y)))


def test_output_length_and_spec_validation():
    assert butterworth_bandpass(np.ones(37)).size == 37
    with pytest.raises(ValueError):
        FilterSpec(30.0, 0.5)
    with pytest.raises(ValueError):
        FilterSpec(0.5, 130.0)
