import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erpwave.preprocessing import FilterDesignError, design_lowpass, filter_signal
from erpwave.signals import Signal

from conftest import FS, rms, tone


@pytest.fixture(scope="module")
def fir():
    return design_lowpass(512, 65, 25)


def test_stopband_rejection_at_100hz(fir):
    assert fir.gain_db(100.0)[0] <= -25.0
    f = np.linspace(100, 256, 400)
    assert np.all(fir.gain_db(f) <= -25.0)


def test_dc_gain_is_unity(fir):
    assert abs(np.sum(fir.taps) - 1.0) < 1e-6
    for cutoff in (20, 40, 65, 120):
        assert abs(np.sum(design_lowpass(512, cutoff, 25).taps) - 1.0) < 1e-6


def test_passband_ripple_within_one_db(fir):
    g = fir.gain_db(np.linspace(0, 65, 200))
    assert np.ptp(g) <= 1.0


def test_taps_are_odd_and_symmetric(fir):
    assert fir.n_taps % 2 == 1
    np.testing.assert_array_equal(fir.taps, fir.taps[::-1])


def test_smallest_tap_count(fir):
    from scipy import signal as sps
    from erpwave.preprocessing import _measure
    smaller = sps.firwin(fir.n_taps - 2, 0.5 * (65 + fir.stopband_edge_hz), window="hamming", fs=512)
    ripple, rejection = _measure(smaller, 512, 65, fir.stopband_edge_hz)
    assert ripple > 1.0 or rejection < 25


@pytest.mark.parametrize("cutoff", [256, 300, 0, -5])
def test_cutoff_outside_nyquist(cutoff):
    with pytest.raises(FilterDesignError):
        design_lowpass(512, cutoff, 25)


def test_attenuation_must_be_meaningful():
    with pytest.raises(FilterDesignError):
        design_lowpass(512, 65, 10)


def test_10hz_amplitude_preserved(fir):
    x = tone(10.0)
    y = filter_signal(x, fir)
    assert abs(rms(y.samples) / rms(x.samples) - 1.0) < 0.02


def test_150hz_attenuated(fir):
    x = tone(150.0)
    y = filter_signal(x, fir)
    assert rms(y.samples) < 0.1 * rms(x.samples)


def test_constant_passes_unchanged(fir):
    y = filter_signal(Signal(np.full(700, 3.7), FS), fir)
    np.testing.assert_allclose(y.samples, 3.7, atol=1e-6)


def test_metadata_preserved(fir):
    s = Signal(np.ones(600), FS, onset_index=100, trial_id="t1")
    y = filter_signal(s, fir)
    assert (y.onset_index, y.trial_id, y.sampling_rate) == (100, "t1", FS)


def _band_limited_noise(seed, n=2048, top_hz=50.0):
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    spec[np.fft.rfftfreq(n, 1 / FS) >= top_hz] = 0
    return np.fft.irfft(spec, n)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_zero_phase(seed):
    x = _band_limited_noise(seed)
    y = filter_signal(Signal(x, FS), design_lowpass(512, 65, 25)).samples
    core = slice(300, len(x) - 300)
    lags = list(range(-20, 21))
    xc = [np.dot(x[core], y[core.start + k:core.stop + k]) for k in lags]
    assert lags[int(np.argmax(xc))] == 0


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 29.0))
def test_idempotent_in_band(freq):
    fir = design_lowpass(512, 65, 25)
    once = filter_signal(tone(freq), fir)
    twice = filter_signal(once, fir)
    assert abs(rms(twice.samples) / rms(once.samples) - 1.0) < 0.01


def test_rate_mismatch(fir):
    with pytest.raises(ValueError, match="designed for"):
        filter_signal(Signal(np.ones(600), 256.0), fir)


def test_design_is_deterministic():
    a = design_lowpass(512, 65, 25)
    b = design_lowpass(512.0, 65.0, 25.0)
    np.testing.assert_array_equal(a.taps, b.taps)
