import numpy as np
import pytest

from erpwave.signals import Signal
from erpwave.synth import TrialSpec, make_template

FS = 512.0


def tone(freq, seconds=2.0, fs=FS, amp=1.0):
    t = np.arange(int(seconds * fs)) / fs
    return Signal(amp * np.sin(2 * np.pi * freq * t), fs)


def rms(x):
    return float(np.sqrt(np.mean(np.asarray(x) ** 2)))


@pytest.fixture
def clean_template():
    """Noise-free default complex: onset at 200 ms, N1 at 170 ms after it."""
    spec = TrialSpec(seed=0)
    return Signal(make_template(spec), spec.sampling_rate, spec.onset_index), spec


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one acceptance outcome for the end-of-run summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
