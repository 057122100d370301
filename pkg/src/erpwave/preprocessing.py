"""Low-pass FIR design and zero-phase application."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .signals import Signal

DEFAULT_TRANSITION_HZ = 35.0
MAX_PASSBAND_RIPPLE_DB = 1.0
MAX_TAPS = 4001


class FilterDesignError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FirFilter:
    taps: np.ndarray
    design_cutoff_hz: float
    design_attenuation_db: float
    sampling_rate: float
    stopband_edge_hz: float = None

    @property
    def n_taps(self) -> int:
        return len(self.taps)

    def gain_db(self, freqs_hz) -> np.ndarray:
        """Magnitude response in dB at the given frequencies (single pass)."""
        _, h = sps.freqz(self.taps, worN=np.atleast_1d(np.asarray(freqs_hz, float)),
                         fs=self.sampling_rate)
        return 20.0 * np.log10(np.maximum(np.abs(h), 1e-300))


def _measure(taps, fs, pass_edge, stop_edge):
    f = np.linspace(0.0, fs / 2.0, 4097)
    _, h = sps.freqz(taps, worN=f, fs=fs)
    db = 20.0 * np.log10(np.maximum(np.abs(h), 1e-300))
    passband = db[f <= pass_edge]
    ripple = passband.max() - passband.min()
    rejection = -db[f >= stop_edge].max()
    return ripple, rejection


def design_lowpass(sampling_rate: float, cutoff: float, attenuation: float = 25.0,
                   transition: float = DEFAULT_TRANSITION_HZ) -> FirFilter:
    """Hamming-windowed sinc low-pass.

    ``cutoff`` is the passband edge; the stopband starts ``transition`` Hz
    above it (clipped below Nyquist). The sinc cutoff sits mid-transition and
    the tap count is the smallest odd number whose measured response keeps
    passband ripple within 1 dB and stopband rejection at least
    ``attenuation`` dB.
    """
    return _design(float(sampling_rate), float(cutoff), float(attenuation), float(transition))


@functools.lru_cache(maxsize=64)
def _design(sampling_rate, cutoff, attenuation, transition):
    nyq = sampling_rate / 2.0
    if not 0 < cutoff < nyq:
        raise FilterDesignError(f"cutoff {cutoff} Hz must lie in (0, {nyq}) Hz")
    if transition <= 0:
        raise FilterDesignError("transition must be positive")
    if attenuation < 20:
        raise FilterDesignError("attenuation must be at least 20 dB")
    stop = min(cutoff + transition, cutoff + 0.9 * (nyq - cutoff))
    mid = 0.5 * (cutoff + stop)
    for n in range(3, MAX_TAPS + 1, 2):
        taps = sps.firwin(n, mid, window="hamming", fs=sampling_rate)
        ripple, rejection = _measure(taps, sampling_rate, cutoff, stop)
        if ripple <= MAX_PASSBAND_RIPPLE_DB and rejection >= attenuation:
            taps = taps / taps.sum()
            taps = 0.5 * (taps + taps[::-1])
            taps.setflags(write=False)
            return FirFilter(taps, float(cutoff), float(attenuation), float(sampling_rate), stop)
    raise FilterDesignError(
        f"no Hamming design up to {MAX_TAPS} taps reaches {attenuation} dB"
    )


def filter_signal(signal: Signal, fir: FirFilter) -> Signal:
    """Forward-backward (zero-phase) filtering with reflected edges."""
    if not np.isclose(signal.sampling_rate, fir.sampling_rate):
        raise ValueError(
            f"filter designed for {fir.sampling_rate} Hz, signal is {signal.sampling_rate} Hz"
        )
    x = np.asarray(signal.samples, float)
    padlen = min(3 * fir.n_taps, len(x) - 1)
    y = sps.filtfilt(fir.taps, [1.0], x, padtype="even", padlen=padlen)
    return signal.with_samples(y)
