"""
Synthetic single-trial EEG with and without an N170-like complex.

All randomness comes from :class:`Xorshift64Star`, a 64-bit xorshift
generator with a multiplicative output scrambler (Vigna 2016, triple
12/25/27, multiplier 0x2545F4914F6CDD1D), seeded through SplitMix64. Normal
deviates use the Box-Muller transform on 53-bit uniforms. The recipe is
small enough to port, so a corpus is fully determined by its seeds.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
from scipy import signal as sps

from .signals import Signal

MASK64 = (1 << 64) - 1
BACKGROUND_RMS_UV = 10.0
ALPHA_HZ = 10.0
ALPHA_BAND_HZ = (8.0, 12.0)
N1_WINDOW_MS = (130.0, 200.0)
BURN_IN = 2048

# 1/f ("pink") shaping filter, three poles and zeros spread over ~3 decades
PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
PINK_A = np.array([1.0, -2.494956002, 2.017265875, -0.522189400])


class SpecError(ValueError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Xorshift64Star:
    """Portable xorshift64* stream."""

    def __init__(self, seed: int):
        state = splitmix64(int(seed) & MASK64)
        self.state = state or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def uniform(self) -> float:
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform_range(self, low: float, high: float) -> float:
        return low + (high - low) * self.uniform()

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        for i in range(0, n, 2):
            u1 = 1.0 - self.uniform()
            u2 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < n:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        return out


@dataclass(frozen=True)
class TemplateParams:
    """Triphasic P1-N1-P2 complex; latencies in ms after onset, amplitudes in µV."""

    p1_latency: float = 110.0
    n1_latency: float = 170.0
    p2_latency: float = 230.0
    p1_amp: float = 3.0
    n1_amp: float = -6.0
    p2_amp: float = 3.0
    p1_width: float = 18.0
    n1_width: float = 18.0
    p2_width: float = 18.0


@dataclass(frozen=True)
class TrialSpec:
    seed: int = 0
    duration_ms: float = 1000.0
    sampling_rate: float = 512.0
    onset_ms: float = 200.0
    has_erp: bool = True
    snr_db: float = 0.0
    template: TemplateParams = field(default_factory=TemplateParams)
    alpha_power: float = 1.0

    def __post_init__(self):
        if self.duration_ms < 300:
            raise SpecError("duration_ms must be at least 300")
        if self.sampling_rate <= 0:
            raise SpecError("sampling_rate must be positive")
        if not 0 <= self.onset_ms < self.duration_ms:
            raise SpecError("onset_ms must lie inside the trial")
        if self.alpha_power < 0:
            raise SpecError("alpha_power must be non-negative")
        if self.has_erp:
            validate_template(self.template)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_ms * self.sampling_rate / 1000.0))

    @property
    def onset_index(self) -> int:
        return int(round(self.onset_ms * self.sampling_rate / 1000.0))

    def n1_index(self) -> int:
        return self.onset_index + int(round(self.template.n1_latency * self.sampling_rate / 1000.0))


def validate_template(tp: TemplateParams):
    if not tp.p1_latency < tp.n1_latency < tp.p2_latency:
        raise SpecError("latencies must satisfy p1 < n1 < p2")
    lo, hi = N1_WINDOW_MS
    if not lo <= tp.n1_latency <= hi:
        raise SpecError(f"n1_latency {tp.n1_latency} ms outside [{lo:g}, {hi:g}] ms")
    if not (tp.n1_amp < 0 < tp.p1_amp and tp.p2_amp > 0):
        raise SpecError("amplitudes must satisfy n1_amp < 0 < p1_amp, p2_amp")
    if min(tp.p1_width, tp.n1_width, tp.p2_width) <= 0:
        raise SpecError("widths must be positive")


@dataclass(frozen=True)
class Truth:
    has_erp: bool
    n1_index: int = None


@dataclass(frozen=True, eq=False)
class LabeledTrial:
    signal: Signal
    spec: TrialSpec
    truth: Truth


def _pink(rng: Xorshift64Star, n: int) -> np.ndarray:
    white = rng.normals(n + BURN_IN)
    return sps.lfilter(PINK_B, PINK_A, white)[BURN_IN:]


@functools.lru_cache(maxsize=16)
def alpha_band_fraction(sampling_rate: float) -> float:
    """Share of the 1/f background's variance that falls in the alpha band."""
    f, h = sps.freqz(PINK_B, PINK_A, worN=1 << 16, fs=sampling_rate)
    power = np.abs(h) ** 2
    lo, hi = ALPHA_BAND_HZ
    return float(power[(f >= lo) & (f <= hi)].sum() / power.sum())


def make_background(duration_ms: float, sampling_rate: float, seed: int,
                    alpha_power: float = 1.0) -> Signal:
    """1/f noise at 10 µV RMS plus a 10 Hz rhythm with random phase.

    ``alpha_power`` is the rhythm's power relative to the noise power in the
    8-12 Hz band, so the alpha peak rises 10*log10(1 + alpha_power) dB above
    the 1/f trend.
    """
    if duration_ms < 300:
        raise SpecError("duration_ms must be at least 300")
    if alpha_power < 0:
        raise SpecError("alpha_power must be non-negative")
    n = int(round(duration_ms * sampling_rate / 1000.0))
    rng = Xorshift64Star(seed)
    pink = _pink(rng, n)
    pink = pink - pink.mean()
    pink *= BACKGROUND_RMS_UV / np.sqrt(np.mean(pink**2))
    phase = 2.0 * math.pi * rng.uniform()
    t = np.arange(n) / sampling_rate
    power = alpha_power * alpha_band_fraction(float(sampling_rate)) * BACKGROUND_RMS_UV**2
    x = pink + math.sqrt(2.0 * power) * np.sin(2.0 * math.pi * ALPHA_HZ * t + phase)
    return Signal(x - x.mean(), sampling_rate)


def make_template(spec: TrialSpec) -> np.ndarray:
    """Sum of three Gaussian bumps placed after the onset, over the whole trial."""
    if not spec.has_erp:
        raise SpecError("make_template requires has_erp")
    tp = spec.template
    t = (np.arange(spec.n_samples) - spec.onset_index) / spec.sampling_rate * 1000.0
    out = np.zeros(spec.n_samples)
    for mu, amp, w in ((tp.p1_latency, tp.p1_amp, tp.p1_width),
                       (tp.n1_latency, tp.n1_amp, tp.n1_width),
                       (tp.p2_latency, tp.p2_amp, tp.p2_width)):
        out += amp * np.exp(-0.5 * ((t - mu) / w) ** 2)
    return out


def template_support(spec: TrialSpec):
    """Sample range [start, stop) from P1 - width to P2 + width."""
    tp, fs = spec.template, spec.sampling_rate
    start = spec.onset_index + int(round((tp.p1_latency - tp.p1_width) * fs / 1000.0))
    stop = spec.onset_index + int(round((tp.p2_latency + tp.p2_width) * fs / 1000.0)) + 1
    return start, stop


def make_trial(spec: TrialSpec, trial_id: str = "") -> LabeledTrial:
    """Background plus, when ``has_erp``, the template scaled to ``snr_db``.

    SNR is the template RMS over the background RMS, both taken over the
    template support.
    """
    bg = make_background(spec.duration_ms, spec.sampling_rate, spec.seed, spec.alpha_power)
    if not spec.has_erp:
        sig = Signal(bg.samples, spec.sampling_rate, spec.onset_index, trial_id)
        return LabeledTrial(sig, spec, Truth(False))
    start, stop = template_support(spec)
    if start < 0 or stop > spec.n_samples:
        raise SpecError(
            f"template support [{start}, {stop}) overflows trial of {spec.n_samples} samples"
        )
    tmpl = make_template(spec)
    rms_t = np.sqrt(np.mean(tmpl[start:stop] ** 2))
    rms_b = np.sqrt(np.mean(bg.samples[start:stop] ** 2))
    gain = rms_b / rms_t * 10.0 ** (spec.snr_db / 20.0)
    sig = Signal(bg.samples + gain * tmpl, spec.sampling_rate, spec.onset_index, trial_id)
    return LabeledTrial(sig, spec, Truth(True, spec.n1_index()))


def make_corpus(n_positive: int, n_negative: int, seed: int, *,
                snr_db: float = 0.0, alpha_power: float = 1.0,
                n1_range=(150.0, 190.0), duration_ms: float = 1000.0,
                onset_ms: float = 200.0, sampling_rate: float = 512.0,
                template: TemplateParams = None) -> List[LabeledTrial]:
    """Positives first, then negatives; P1/P2 move with the drawn N1 latency.

    Trial ids are ``trial_0000``, ``trial_0001``, ... in corpus order.
    """
    lo, hi = N1_WINDOW_MS
    if not lo <= n1_range[0] <= n1_range[1] <= hi:
        raise SpecError(f"n1_range {n1_range} must lie within [{lo:g}, {hi:g}] ms")
    base = template or TemplateParams()
    master = Xorshift64Star(seed)
    if n_positive < 0 or n_negative < 0:
        raise SpecError("trial counts must be non-negative")
    trials = []
    for i in range(n_positive + n_negative):
        trial_seed = master.next_u64()
        n1 = master.uniform_range(*n1_range)
        shift = n1 - base.n1_latency
        tp = replace(base, p1_latency=base.p1_latency + shift, n1_latency=n1,
                     p2_latency=base.p2_latency + shift)
        spec = TrialSpec(seed=trial_seed, duration_ms=duration_ms,
                         sampling_rate=sampling_rate, onset_ms=onset_ms,
                         has_erp=i < n_positive, snr_db=snr_db, template=tp,
                         alpha_power=alpha_power)
        trials.append(make_trial(spec, f"trial_{i:04d}"))
    return trials
