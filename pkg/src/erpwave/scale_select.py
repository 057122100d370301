"""Analysis-scale choice, the cone-of-influence test and threshold calibration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DetectorConfig
from .preprocessing import design_lowpass, filter_signal
from .signals import Signal
from .wavelets import CwtMatrix, WaveletSpec, cwt, load_wavelet


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScaleEnergy:
    scales: np.ndarray
    energy: np.ndarray
    best: float


@dataclass(frozen=True)
class ConeReport:
    localized: bool
    peak_time_index: int
    peak_scale: float
    concentration: float


@dataclass(frozen=True, eq=False)
class ThresholdCalibration:
    c_tau: float
    n_trials: int
    per_trial_peaks: np.ndarray
    per_trial_scales: np.ndarray = None
    analysis_scale: float = 0.0

    def config_update(self) -> dict:
        """The calibrated values as DetectorConfig keys."""
        return {"c_tau": self.c_tau, "analysis_scale": self.analysis_scale}

    def to_dict(self) -> dict:
        out = self.config_update()
        out["n_trials"] = self.n_trials
        out["per_trial_peaks"] = [float(v) for v in self.per_trial_peaks]
        if self.per_trial_scales is not None:
            out["per_trial_scales"] = [float(v) for v in self.per_trial_scales]
        return out


def scale_energy(matrix: CwtMatrix) -> ScaleEnergy:
    """Sum of |C(a, b)| over time for every scale.

    ``np.argmax`` returns the first maximum, so ties go to the smaller scale.
    """
    coeffs = np.asarray(matrix.coefficients)
    if coeffs.size == 0:
        raise ValueError("empty coefficient matrix")
    energy = np.abs(coeffs).sum(axis=1)
    return ScaleEnergy(np.asarray(matrix.scales), energy, float(matrix.scales[int(np.argmax(energy))]))


def cone_of_influence(matrix: CwtMatrix, c_tau: float, window_ms: float,
                      fraction: float) -> ConeReport:
    """Test whether large coefficients cluster in time around the global maximum.

    The concentration is the share of coefficients with |C| > c_tau that lie
    within ``window_ms`` of the time of the global |C| maximum.
    """
    mag = np.abs(np.asarray(matrix.coefficients))
    i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
    above = mag > c_tau
    total = int(above.sum())
    if total == 0:
        return ConeReport(False, int(j), float(matrix.scales[i]), 0.0)
    half = int(round(window_ms * matrix.sampling_rate / 1000.0))
    lo, hi = max(0, j - half), j + half + 1
    concentration = int(above[:, lo:hi].sum()) / total
    return ConeReport(bool(concentration >= fraction), int(j), float(matrix.scales[i]),
                      float(concentration))


def select_analysis_scale(matrix: CwtMatrix, cone: ConeReport, config: DetectorConfig) -> float:
    """Scale of the cone peak when localized.

    Otherwise the calibrated ``config.analysis_scale`` when set, else the
    in-band energy maximum.
    """
    lo, hi = config.scale_band
    scales = np.asarray(matrix.scales)
    in_band = (scales >= lo) & (scales <= hi)
    if not in_band.any():
        raise ValueError(
            f"scale band [{lo}, {hi}] does not overlap matrix scales "
            f"[{scales.min():g}, {scales.max():g}]"
        )
    if cone.localized:
        return cone.peak_scale
    if config.analysis_scale:
        return float(config.analysis_scale)
    energy = scale_energy(matrix).energy
    candidates = np.flatnonzero(in_band)
    return float(scales[candidates[int(np.argmax(energy[candidates]))]])


def band_scales(config: DetectorConfig) -> np.ndarray:
    """Integer scales of the band, plus the analysis scale if it falls between them."""
    lo, hi = config.scale_band
    scales = np.arange(lo, hi + 1, dtype=float)
    if config.analysis_scale:
        scales = np.union1d(scales, [float(config.analysis_scale)])
    return scales


def prepare(signal: Signal, config: DetectorConfig) -> Signal:
    """Low-pass the trace as the detector does before the CWT."""
    fir = design_lowpass(signal.sampling_rate, config.lowpass_cutoff_hz,
                         config.lowpass_attenuation_db)
    return filter_signal(signal, fir)


def search_bounds(n: int, fs: float, onset_index, window_ms) -> tuple:
    """Sample range [start, stop) of the post-onset search window, or the whole trace."""
    if onset_index is None:
        return 0, n
    start = onset_index + int(round(window_ms[0] * fs / 1000.0))
    stop = onset_index + int(round(window_ms[1] * fs / 1000.0)) + 1
    return max(0, start), min(n, stop)


def trial_peak(signal: Signal, spec: WaveletSpec, config: DetectorConfig):
    """Largest positive coefficient in the calibration window at the trial's analysis scale."""
    if signal.onset_index is None:
        raise CalibrationError(f"trial {signal.trial_id or '?'} has no stimulus onset")
    x = prepare(signal, config)
    matrix = cwt(x, spec, band_scales(config), config.cascade_iterations)
    start, stop = search_bounds(len(x), x.sampling_rate, x.onset_index, config.search_window_ms)
    region = matrix.columns(start, stop)
    cone = cone_of_influence(region, 0.0, config.cone_window_ms, config.cone_fraction)
    scale = select_analysis_scale(region, cone, config)
    lo, hi = search_bounds(len(x), x.sampling_rate, x.onset_index, config.calibration_window_ms)
    window = matrix.row(scale)[lo:hi]
    peak = float(window.max()) if window.size else 0.0
    if peak <= 0:
        raise CalibrationError(
            f"trial {signal.trial_id or '?'} has no positive coefficient in the calibration window"
        )
    return peak, scale


def average_trials(trials: Sequence[Signal]) -> Signal:
    """Onset-aligned mean of labeled trials, cropped to their common span."""
    trials = list(trials)
    if not trials:
        raise CalibrationError("averaging needs at least one trial")
    fs = trials[0].sampling_rate
    for t in trials:
        if t.onset_index is None:
            raise CalibrationError(f"trial {t.trial_id or '?'} has no stimulus onset")
        if not np.isclose(t.sampling_rate, fs):
            raise CalibrationError("trials must share one sampling rate")
    pre = min(t.onset_index for t in trials)
    post = min(len(t) - t.onset_index for t in trials)
    stack = np.stack([t.samples[t.onset_index - pre:t.onset_index + post] for t in trials])
    return Signal(stack.mean(axis=0), fs, pre)


def averaged_scale_energy(trials: Sequence[Signal], spec: WaveletSpec,
                          config: DetectorConfig) -> ScaleEnergy:
    """Scale energy of the averaged ERP over the calibration window, within the band."""
    x = prepare(average_trials(trials), config)
    lo, hi = config.scale_band
    matrix = cwt(x, spec, np.arange(lo, hi + 1, dtype=float), config.cascade_iterations)
    start, stop = search_bounds(len(x), x.sampling_rate, x.onset_index,
                                config.calibration_window_ms)
    return scale_energy(matrix.columns(start, stop))


def calibrate_threshold(trials: Sequence[Signal], spec: WaveletSpec = None,
                        config: DetectorConfig = None) -> ThresholdCalibration:
    """Set c_tau to half the mean per-trial peak coefficient of labeled ERP trials.

    Unless ``config.analysis_scale`` is already set, it is first taken from
    the energy maximum of the trials' average, and each trial's peak is then
    read at the scale the detector would use for it.
    """
    config = config or DetectorConfig()
    spec = spec or load_wavelet(config.wavelet)
    trials = list(trials)
    if not trials:
        raise CalibrationError("calibration needs at least one labeled trial")
    if not config.analysis_scale:
        config = config.replace(analysis_scale=averaged_scale_energy(trials, spec, config).best)
    results = [trial_peak(t, spec, config) for t in trials]
    peaks = np.array([p for p, _ in results])
    return ThresholdCalibration(0.5 * float(np.mean(peaks)), len(trials), peaks,
                                np.array([s for _, s in results]),
                                float(config.analysis_scale))


def threshold_from_peaks(peaks: Sequence[float]) -> ThresholdCalibration:
    peaks = np.asarray(peaks, float)
    if peaks.size == 0:
        raise CalibrationError("calibration needs at least one peak")
    return ThresholdCalibration(0.5 * float(np.mean(peaks)), int(peaks.size), peaks)
