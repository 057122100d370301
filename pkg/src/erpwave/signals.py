"""Single-channel EEG trace container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled single-channel trace.

    Parameters
    ----------
    samples : array
        Amplitudes in µV.
    sampling_rate : float
        Hz.
    onset_index : int, optional
        Sample index of the stimulus onset, if known.
    """

    samples: np.ndarray
    sampling_rate: float
    onset_index: Optional[int] = None
    trial_id: str = field(default="", compare=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("signal samples must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError("signal contains non-finite samples")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be positive")
        if self.onset_index is not None and not 0 <= self.onset_index < len(x):
            raise ValueError(f"onset_index {self.onset_index} outside signal of length {len(x)}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return len(self.samples) / self.sampling_rate * 1000.0

    def ms_to_samples(self, ms: float) -> int:
        return int(round(ms * self.sampling_rate / 1000.0))

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sampling_rate, self.onset_index, self.trial_id)
