"""Scoring detections against ground truth and the synthetic benchmark."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .config import DetectorConfig
from .detector import Detection, detect
from .scale_select import ThresholdCalibration, calibrate_threshold
from .synth import LabeledTrial

LATENCY_GATE_MS = 30.0


class SplitError(ValueError):
    pass


def _rate(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts plus the N1 latency errors (ms) of the true positives."""

    tp: int
    fn: int
    fp: int
    tn: int
    latency_errors_ms: tuple = ()

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "latency_errors_ms",
                           tuple(sorted(float(e) for e in self.latency_errors_ms)))

    @property
    def n_positive(self) -> int:
        return self.tp + self.fn

    @property
    def n_negative(self) -> int:
        return self.tn + self.fp

    @property
    def hit_rate(self) -> Optional[float]:
        """tp / (tp + fn); None without positive trials."""
        return _rate(self.tp, self.n_positive)

    @property
    def rejection_rate(self) -> Optional[float]:
        """tn / (tn + fp); None without negative trials."""
        return _rate(self.tn, self.n_negative)

    @property
    def false_positive_rate(self) -> Optional[float]:
        return _rate(self.fp, self.n_negative)

    @property
    def overall(self) -> Optional[float]:
        return _rate(self.tp + self.tn, self.n_positive + self.n_negative)

    @property
    def median_latency_error_ms(self) -> Optional[float]:
        if not self.latency_errors_ms:
            return None
        return float(np.median(self.latency_errors_ms))

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn,
            "hit_rate": self.hit_rate,
            "rejection_rate": self.rejection_rate,
            "overall": self.overall,
            "median_latency_error_ms": self.median_latency_error_ms,
            "latency_errors_ms": list(self.latency_errors_ms),
        }

    def table(self, label: str = "wavelet asymmetry") -> str:
        """Plain-text accuracy table: positive, negative and overall columns."""

        def pct(v, digits):
            return "n/a" if v is None else f"{100.0 * v:.{digits}f}%"

        head = ("Algorithm", "ERP present", "ERP absent", "Overall")
        row = (label, pct(self.hit_rate, 1), pct(self.rejection_rate, 1), pct(self.overall, 2))
        counts = ("trials", f"{self.tp}/{self.n_positive}", f"{self.tn}/{self.n_negative}",
                  f"{self.tp + self.tn}/{self.n_positive + self.n_negative}")
        widths = [max(len(r[i]) for r in (head, row, counts)) for i in range(4)]

        def fmt(r):
            return "  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])])

        rule = "-" * len(fmt(head))
        return "\n".join([fmt(head), rule, fmt(row), fmt(counts)])


def score(detections: Sequence[Detection], truths: Sequence, sampling_rate: float = 512.0,
          gate_ms: float = LATENCY_GATE_MS) -> EvalReport:
    """Confusion counts for aligned detections and truth labels.

    A detection on an ERP trial is a true positive only when its N1 lies within
    ``gate_ms`` of the true N1; any present detection on a no-ERP trial is a
    false positive. Truth objects need ``has_erp`` and ``n1_index``.
    """
    if len(detections) != len(truths):
        raise ValueError(f"{len(detections)} detections for {len(truths)} truth labels")
    tp = fn = fp = tn = 0
    errors = []
    for det, truth in zip(detections, truths):
        if truth.has_erp:
            if det.present and truth.n1_index is not None:
                err = abs(det.n1.index - truth.n1_index) * 1000.0 / sampling_rate
                if err <= gate_ms:
                    tp += 1
                    errors.append(err)
                    continue
            fn += 1
        elif det.present:
            fp += 1
        else:
            tn += 1
    return EvalReport(tp, fn, fp, tn, tuple(errors))


@dataclass(frozen=True, eq=False)
class BenchmarkRun:
    config: DetectorConfig
    calibration: Optional[ThresholdCalibration]
    trials: List[LabeledTrial]
    detections: List[Detection]
    report: EvalReport


def _detect_one(args):
    signal, config = args
    return detect(signal, config)


def detect_all(signals, config: DetectorConfig, workers: int = None) -> List[Detection]:
    """Run detect over trials, optionally in worker processes; order is preserved."""
    signals = list(signals)
    if workers and workers > 1 and len(signals) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_detect_one, [(s, config) for s in signals], chunksize=16))
    return [detect(s, config) for s in signals]


def benchmark(corpus: Sequence[LabeledTrial], config: DetectorConfig = None,
              n_calibration: int = 20, calibration_trials: Sequence[LabeledTrial] = None,
              workers: int = None) -> BenchmarkRun:
    """Calibrate on held-out positives, detect on the rest, score.

    The first ``n_calibration`` ERP trials of ``corpus`` are held out for
    calibration unless ``calibration_trials`` is given, in which case the
    whole corpus is evaluated. ``n_calibration=0`` skips calibration and uses
    ``config`` as is.

    Raises
    ------
    SplitError
        When the corpus has too few ERP trials to hold out, or nothing is left
        to evaluate.
    """
    config = config or DetectorConfig()
    corpus = list(corpus)
    if not corpus:
        raise SplitError("empty corpus")
    calibration = None
    evaluate = corpus
    if calibration_trials is not None:
        held = list(calibration_trials)
        if not held:
            raise SplitError("calibration_trials is empty")
    elif n_calibration > 0:
        positives = [i for i, t in enumerate(corpus) if t.truth.has_erp]
        if len(positives) < n_calibration:
            raise SplitError(
                f"need {n_calibration} ERP trials for calibration, corpus has {len(positives)}"
            )
        chosen = set(positives[:n_calibration])
        held = [corpus[i] for i in sorted(chosen)]
        evaluate = [t for i, t in enumerate(corpus) if i not in chosen]
        if not evaluate:
            raise SplitError("no trials left after holding out the calibration set")
    else:
        held = []
    if held:
        calibration = calibrate_threshold([t.signal for t in held], config=config)
        config = config.replace(**calibration.config_update())
    detections = detect_all([t.signal for t in evaluate], config, workers)
    fs = evaluate[0].signal.sampling_rate
    report = score(detections, [t.truth for t in evaluate], fs)
    return BenchmarkRun(config, calibration, evaluate, detections, report)


def run_benchmark(corpus: Sequence[LabeledTrial], config: DetectorConfig = None,
                  n_calibration: int = 20, **kwargs) -> EvalReport:
    return benchmark(corpus, config, n_calibration, **kwargs).report
