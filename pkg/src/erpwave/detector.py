"""
Two-stage single-trial detector: proximity detection on the CWT row at the
analysis scale, then slope-based P1/N1/P2 identification, period validation
and segmentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .config import DetectorConfig
from .preprocessing import design_lowpass, filter_signal
from .scale_select import (band_scales, cone_of_influence, prepare, search_bounds,
                           select_analysis_scale)
from .signals import Signal
from .wavelets import cwt, load_wavelet

PEAK_TRANSITION_HZ = 10.0


class PeakError(ValueError):
    """Peak identification failed; ``bound`` names the violated constraint."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class PeriodError(PeakError):
    """Total P1-P2 period outside its bounds; the caller may retry."""


@dataclass(frozen=True)
class CoefficientPair:
    neg_index: int
    pos_index: int
    neg_value: float
    pos_value: float
    period_ms: float
    energy: float
    score: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Peak:
    index: int
    latency_ms: float
    amplitude: float

    def to_dict(self) -> dict:
        return {"index": self.index, "ms": self.latency_ms, "uv": self.amplitude}


@dataclass(frozen=True)
class PeakSet:
    p1: Peak
    n1: Peak
    p2: Peak


@dataclass(frozen=True)
class Detection:
    present: bool
    start_index: int = 0
    end_index: int = 0
    p1: Optional[Peak] = None
    n1: Optional[Peak] = None
    p2: Optional[Peak] = None
    best_scale: Optional[float] = None
    pair: Optional[CoefficientPair] = None
    retried: bool = False

    @classmethod
    def absent(cls, best_scale=None) -> "Detection":
        return cls(False, best_scale=best_scale)

    @property
    def score(self) -> Optional[float]:
        return None if self.pair is None else self.pair.score


def gaussian_weight(period_ms: float, center_ms: float = 70.0, sigma_ms: float = 9.0) -> float:
    if sigma_ms <= 0:
        raise ValueError("sigma_ms must be positive")
    return math.exp(-((period_ms - center_ms) ** 2) / (2.0 * sigma_ms**2))


def threshold_row(row, c_tau: float, mode: str = "positive") -> np.ndarray:
    """Suppress coefficients that fail the threshold.

    ``"positive"`` keeps positive coefficients with C >= c_tau and every
    negative coefficient; ``"symmetric"`` also requires C <= -c_tau of the
    negatives.
    """
    row = np.asarray(row, float)
    kept = np.where(row >= c_tau, row, 0.0)
    if mode == "positive":
        return np.where(row < 0, row, kept)
    if mode == "symmetric":
        return np.where(row <= -c_tau, row, kept)
    raise ValueError(f"unknown threshold mode {mode!r}")


def _extrema(z: np.ndarray, start: int, stop: int):
    """Local maxima of positive and local minima of negative survivors in [start, stop)."""
    left = np.concatenate(([0.0], z[:-1]))
    right = np.concatenate((z[1:], [0.0]))
    idx = np.arange(len(z))
    inside = (idx >= start) & (idx < stop)
    maxima = np.flatnonzero(inside & (z > 0) & (z >= left) & (z > right))
    minima = np.flatnonzero(inside & (z < 0) & (z <= left) & (z < right))
    return minima, maxima


def proximity_detect(row, config: DetectorConfig, sampling_rate: float,
                     onset_index: Optional[int] = None) -> List[CoefficientPair]:
    """Rank candidate (negative, positive) coefficient pairs.

    Coefficients failing ``config.c_tau`` are suppressed (see
    :func:`threshold_row`). Among the surviving local extrema inside the
    search window every negative extremum that precedes a positive one by a
    period inside ``period_window_ms`` forms a pair, scored as
    (|C-| + |C+|) times the Gaussian period weight. An empty list means no
    ERP.
    """
    row = np.asarray(row, float)
    z = threshold_row(row, config.c_tau, config.threshold_mode)
    if not np.any(z > 0):
        return []
    start, stop = search_bounds(len(row), sampling_rate, onset_index, config.search_window_ms)
    minima, maxima = _extrema(z, start, stop)
    lo, hi = config.period_window_ms
    ms_per_sample = 1000.0 / sampling_rate
    pairs = []
    for t2 in minima:
        for t1 in maxima[maxima > t2]:
            period = (t1 - t2) * ms_per_sample
            if period > hi:
                break
            if period < lo:
                continue
            energy = abs(z[t2]) + abs(z[t1])
            w = gaussian_weight(period, config.gaussian_center_ms, config.gaussian_sigma_ms)
            pairs.append(CoefficientPair(int(t2), int(t1), float(z[t2]), float(z[t1]),
                                         float(period), float(energy), float(energy * w)))
    pairs.sort(key=lambda p: (-p.score, p.neg_index, p.pos_index))
    return pairs


def _persistent(x: np.ndarray, i: int, k: int, sign: int) -> bool:
    """True when x falls (sign=-1: rises) strictly for k samples into i and rises (falls) k after."""
    if i - k < 0 or i + k >= len(x):
        return False
    before = np.diff(x[i - k:i + 1])
    after = np.diff(x[i:i + k + 1])
    if sign < 0:
        return bool(np.all(before < 0) and np.all(after > 0))
    return bool(np.all(before > 0) and np.all(after < 0))


def _latency(index: int, signal: Signal) -> float:
    ref = signal.onset_index or 0
    return (index - ref) * 1000.0 / signal.sampling_rate


def _peak(index: int, signal: Signal) -> Peak:
    return Peak(int(index), float(_latency(index, signal)), float(signal.samples[index]))


def _check(name, value, bounds):
    lo, hi = bounds
    if not lo <= value <= hi:
        raise PeakError(f"{name} period {value:.1f} ms outside [{lo:g}, {hi:g}] ms", name)


def peak_trace(signal: Signal, config: DetectorConfig) -> Signal:
    """The preprocessed trace smoothed for slope detection.

    Slope-sign tests on a 65 Hz trace lock onto broadband noise wiggles, so
    peaks are searched on a further low-passed copy (``peak_lowpass_hz``; 0
    leaves the trace unchanged).
    """
    cutoff = config.peak_lowpass_hz
    if not cutoff or cutoff >= signal.sampling_rate / 2.0 - PEAK_TRANSITION_HZ:
        return signal
    fir = design_lowpass(signal.sampling_rate, cutoff, config.lowpass_attenuation_db,
                         transition=PEAK_TRANSITION_HZ)
    return filter_signal(signal, fir)


def detect_peaks(signal: Signal, pair: CoefficientPair, config: DetectorConfig,
                 persistence: int = None, frame_extra_ms: float = 0.0) -> PeakSet:
    """Find N1 in the proximity frame, then the flanking P1 and P2.

    N1 is the lowest local minimum of the trace inside the pair span widened
    by ``frame_margin_ms`` (+ ``frame_extra_ms``) whose slope keeps its sign
    for ``persistence`` samples on each side. P1 and P2 are the nearest such
    maxima before and after it.

    Raises
    ------
    PeakError
        With ``bound`` set to ``"n1"``, ``"p1"``, ``"p2"``, ``"morphology"``,
        ``"p1_n1"`` or ``"n1_p2"``.
    """
    x = np.asarray(signal.samples, float)
    n = len(x)
    if not (0 <= pair.neg_index < n and 0 <= pair.pos_index < n):
        raise ValueError("pair indices outside the signal")
    k = config.persistence if persistence is None else persistence
    margin = int(round((config.frame_margin_ms + frame_extra_ms) * signal.sampling_rate / 1000.0))
    lo = max(0, min(pair.neg_index, pair.pos_index) - margin)
    hi = min(n - 1, max(pair.neg_index, pair.pos_index) + margin)

    minima = [i for i in range(lo, hi + 1) if _persistent(x, i, k, -1)]
    if not minima:
        raise PeakError(f"no persistent minimum in frame [{lo}, {hi}]", "n1")
    n1 = min(minima, key=lambda i: (x[i], i))

    p1 = next((i for i in range(n1 - 1, k - 1, -1) if _persistent(x, i, k, +1)), None)
    if p1 is None:
        raise PeakError("no P1 maximum before N1", "p1")
    p2 = next((i for i in range(n1 + 1, n - k) if _persistent(x, i, k, +1)), None)
    if p2 is None:
        raise PeakError("no P2 maximum after N1", "p2")

    if not (x[n1] < x[p1] and x[n1] < x[p2]):
        raise PeakError("N1 is not below both P1 and P2", "morphology")
    ms = 1000.0 / signal.sampling_rate
    _check("p1_n1", (n1 - p1) * ms, config.p1_n1_bounds_ms)
    _check("n1_p2", (p2 - n1) * ms, config.n1_p2_bounds_ms)
    return PeakSet(_peak(p1, signal), _peak(n1, signal), _peak(p2, signal))


def validate_and_segment(peaks: PeakSet, signal: Signal, config: DetectorConfig,
                         best_scale=None, pair=None, retried=False) -> Detection:
    """Check the total P1-P2 period and cut the padded segment.

    Raises
    ------
    PeriodError
        When the total period is out of bounds; the caller should retry.
    """
    total = (peaks.p2.index - peaks.p1.index) * 1000.0 / signal.sampling_rate
    lo, hi = config.total_bounds_ms
    if not lo <= total <= hi:
        raise PeriodError(f"total period {total:.1f} ms outside [{lo:g}, {hi:g}] ms", "total")
    pad = int(round(config.padding_ms * signal.sampling_rate / 1000.0))
    start = max(0, peaks.p1.index - pad)
    end = min(len(signal) - 1, peaks.p2.index + pad)
    return Detection(True, start, end, peaks.p1, peaks.n1, peaks.p2, best_scale, pair, retried)


def identify(signal: Signal, pair: CoefficientPair, config: DetectorConfig,
             best_scale=None) -> Optional[Detection]:
    """Peak identification and validation for one pair, with relaxed retries."""
    for attempt in range(config.max_retries + 1):
        relaxed = attempt > 0
        try:
            peaks = detect_peaks(
                signal, pair, config,
                persistence=config.retry_persistence if relaxed else config.persistence,
                frame_extra_ms=attempt * config.retry_frame_extra_ms,
            )
            return validate_and_segment(peaks, signal, config, best_scale, pair, relaxed)
        except PeakError:
            continue
    return None


def detect(signal: Signal, config: DetectorConfig = None) -> Detection:
    """Run the full pipeline on one trial; absence is a normal result.

    When the cone picks a scale other than the calibrated ``analysis_scale``
    and no pair there survives validation, the calibrated scale is tried
    too, since ``c_tau`` was measured at it.
    """
    config = config or DetectorConfig()
    if signal.duration_ms < 300:
        raise ValueError("detect needs at least 300 ms of signal")
    spec = load_wavelet(config.wavelet)
    x = prepare(signal, config)
    matrix = cwt(x, spec, band_scales(config), config.cascade_iterations)
    start, stop = search_bounds(len(x), x.sampling_rate, x.onset_index, config.search_window_ms)
    region = matrix.columns(start, stop)
    cone = cone_of_influence(region, config.c_tau, config.cone_window_ms, config.cone_fraction)
    scale = select_analysis_scale(region, cone, config)
    scales = [scale]
    if config.analysis_scale and config.analysis_scale != scale:
        scales.append(float(config.analysis_scale))
    y = None
    for a in scales:
        pairs = proximity_detect(matrix.row(a), config, x.sampling_rate, x.onset_index)
        if pairs and y is None:
            y = peak_trace(x, config)
        for pair in pairs:
            found = identify(y, pair, config, a)
            if found is not None:
                return found
    return Detection.absent(best_scale=scale)
