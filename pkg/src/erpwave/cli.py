"""
Command-line entry point.

Exit codes: 0 ran (whether or not ERPs were found), 1 usage or configuration
error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, DetectorConfig
from .datafiles import (DataError, TrialRecord, TruthRecord, format_trials, format_truth,
                        read_trials, read_truth, write_text)
from .detector import Detection
from .eval import SplitError, benchmark, detect_all, score
from .scale_select import (CalibrationError, average_trials, calibrate_threshold, prepare,
                           scale_energy, search_bounds)
from .synth import N1_WINDOW_MS, SpecError, TemplateParams, make_corpus
from .wavelets import SUPPORTED_WAVELETS, UnknownWaveletError, cwt, group_delay, load_wavelet

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair(text, kind=float):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    try:
        return kind(lo), kind(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in lo:hi, got {text!r}") from None


def _int_pair(text):
    return _pair(text, int)


def _dump(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(path, text)


def load_config(args) -> DetectorConfig:
    """Defaults, then --config JSON, then individual flags."""
    config = DetectorConfig()
    if getattr(args, "config", None):
        try:
            config = DetectorConfig.from_json(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    changes = {}
    if getattr(args, "wavelet", None):
        changes["wavelet"] = args.wavelet
    if getattr(args, "scale_band", None):
        changes["scale_band"] = args.scale_band
    if getattr(args, "c_tau", None) is not None:
        changes["c_tau"] = args.c_tau
    if changes:
        config = DetectorConfig.from_dict(changes, base=config)
    return config


def _peak(p):
    return None if p is None else {"ms": p.latency_ms, "uv": p.amplitude}


def detection_entry(record: TrialRecord, det: Detection) -> dict:
    fs = record.signal.sampling_rate
    return {
        "trial_id": record.trial_id,
        "channel": record.channel,
        "present": det.present,
        "start_ms": det.start_index * 1000.0 / fs,
        "end_ms": det.end_index * 1000.0 / fs,
        "p1": _peak(det.p1),
        "n1": _peak(det.n1),
        "p2": _peak(det.p2),
        "score": det.score,
        "best_scale": det.best_scale,
        "retried": det.retried,
    }


def run_output(config, records, detections, report=None, calibration=None) -> dict:
    out = {
        "config_echo": config.to_dict(),
        "per_trial": [detection_entry(r, d) for r, d in zip(records, detections)],
    }
    if calibration is not None:
        out["calibration"] = calibration.to_dict()
    if report is not None:
        out["report"] = report.to_dict()
    return out


def _truth_for(records, truth_path):
    truth = read_truth(truth_path)
    labels = []
    for r in records:
        if r.trial_id not in truth:
            raise DataError(f"trial {r.trial_id} missing from truth file", path=truth_path)
        labels.append(truth[r.trial_id])
    return labels


def cmd_detect(args) -> int:
    config = load_config(args)
    records = read_trials(args.input, args.rate)
    detections = detect_all([r.signal for r in records], config, args.workers)
    report = None
    if args.truth:
        labels = _truth_for(records, args.truth)
        fs = records[0].signal.sampling_rate if records else 512.0
        report = score(detections, labels, fs)
    _dump(run_output(config, records, detections, report), args.out)
    if report is not None:
        print(report.table(), file=sys.stderr)
    return EXIT_OK


def _template(args) -> TemplateParams:
    base = TemplateParams()
    shift = args.n1_latency - base.n1_latency
    return TemplateParams(base.p1_latency + shift, args.n1_latency, base.p2_latency + shift,
                          p1_amp=base.p1_amp, n1_amp=base.n1_amp, p2_amp=base.p2_amp,
                          p1_width=args.width, n1_width=args.width, p2_width=args.width)


def _synth_corpus(args):
    lo, hi = N1_WINDOW_MS
    if args.n1_latency is not None:
        if not lo <= args.n1_latency <= hi:
            raise SpecError(f"n1_latency {args.n1_latency:g} ms outside [{lo:g}, {hi:g}] ms")
        n1_range = (args.n1_latency, args.n1_latency)
        template = _template(args)
    else:
        n1_range = args.n1_range
        args.n1_latency = TemplateParams().n1_latency
        template = _template(args)
    return make_corpus(args.count, args.negatives, args.seed, snr_db=args.snr,
                       alpha_power=args.alpha, n1_range=n1_range, duration_ms=args.duration,
                       onset_ms=args.onset, sampling_rate=args.rate, template=template)


def cmd_synth(args) -> int:
    corpus = _synth_corpus(args)
    n = int(round(args.duration * args.rate / 1000.0))
    records = [TrialRecord(t.signal.trial_id, args.channel, t.signal) for t in corpus]
    truth = [TruthRecord(t.signal.trial_id, t.truth.has_erp, t.truth.n1_index) for t in corpus]
    write_text(args.out, format_trials(records, args.rate, n))
    truth_path = args.truth_out or _sidecar(args.out)
    write_text(truth_path, format_truth(truth))
    return EXIT_OK


def _sidecar(path):
    return (path[:-4] if path.endswith(".csv") else path) + ".truth.csv"


def cmd_group_delay(args) -> int:
    prof = group_delay(load_wavelet(args.wavelet), args.n_freqs)
    lines = ["omega,magnitude,phase,group_delay,phase_delay"]
    for row in zip(prof.omega, prof.magnitude, prof.phase, prof.group_delay, prof.phase_delay):
        lines.append(",".join("" if not np.isfinite(v) else repr(float(v)) for v in row))
    _write_lines(lines, args.out)
    return EXIT_OK


def _write_lines(lines, path):
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(path, text)


def _selected(records, args):
    if args.trial:
        chosen = [r for r in records if r.trial_id in set(args.trial)]
        missing = set(args.trial) - {r.trial_id for r in chosen}
        if missing:
            raise DataError(f"trials not found: {', '.join(sorted(missing))}")
        return chosen
    if getattr(args, "truth", None):
        labels = _truth_for(records, args.truth)
        return [r for r, t in zip(records, labels) if t.has_erp]
    return records


def cmd_scale_energy(args) -> int:
    config = load_config(args)
    records = _selected(read_trials(args.input, args.rate), args)
    if not records:
        raise DataError("no trials to analyze")
    signal = average_trials([r.signal for r in records]) if len(records) > 1 else records[0].signal
    x = prepare(signal, config)
    lo, hi = args.scales
    matrix = cwt(x, load_wavelet(config.wavelet), np.arange(lo, hi + 1, dtype=float),
                 config.cascade_iterations)
    if x.onset_index is not None and not args.whole:
        start, stop = search_bounds(len(x), x.sampling_rate, x.onset_index,
                                    config.calibration_window_ms)
        matrix = matrix.columns(start, stop)
    se = scale_energy(matrix)
    lines = ["scale,energy"] + [f"{s!r},{e!r}" for s, e in zip(se.scales.tolist(), se.energy.tolist())]
    _write_lines(lines, args.out)
    print(f"best scale {se.best:g}", file=sys.stderr)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = load_config(args)
    records = _selected(read_trials(args.input, args.rate), args)
    if args.n is not None:
        records = records[:args.n]
    cal = calibrate_threshold([r.signal for r in records], config=config)
    update = cal.config_update()
    _dump(update, args.out)
    if args.details:
        _dump(cal.to_dict(), args.details)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = load_config(args)
    args.n1_latency = None
    args.width = TemplateParams().n1_width
    args.count = args.positives + args.calibration
    corpus = _synth_corpus(args)
    run = benchmark(corpus, config, args.calibration, workers=args.workers)
    records = [TrialRecord(t.signal.trial_id, "0", t.signal) for t in run.trials]
    _dump(run_output(run.config, records, run.detections, run.report, run.calibration), args.out)
    print(run.report.table(), file=sys.stderr)
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--config", help="JSON file with DetectorConfig keys")
    p.add_argument("--wavelet", choices=SUPPORTED_WAVELETS)
    p.add_argument("--scale-band", type=_int_pair, metavar="LO:HI")
    p.add_argument("--c-tau", type=float, help="detection threshold (CWT coefficient units)")


def _add_synth_flags(p):
    p.add_argument("--negatives", type=int, default=0, help="trials without an ERP")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr", type=float, default=0.0, help="dB")
    p.add_argument("--alpha", type=float, default=1.0, help="relative 10 Hz power")
    p.add_argument("--n1-range", type=_pair, default=(150.0, 190.0), metavar="LO:HI")
    p.add_argument("--duration", type=float, default=1000.0, help="ms")
    p.add_argument("--onset", type=float, default=200.0, help="ms")
    p.add_argument("--rate", type=float, default=512.0, help="Hz")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="erpwave", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect ERPs in a trial CSV")
    p.add_argument("input")
    _add_config_flags(p)
    p.add_argument("--rate", type=float, help="sampling rate if the file has no metadata row")
    p.add_argument("--truth", help="truth CSV; adds a scored report")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="write a synthetic corpus and its truth sidecar")
    p.add_argument("--count", type=int, required=True, help="trials with an ERP")
    _add_synth_flags(p)
    p.add_argument("--n1-latency", type=float, help="fixed N1 latency in ms (overrides --n1-range)")
    p.add_argument("--width", type=float, default=18.0, help="peak width in ms")
    p.add_argument("--channel", default="0")
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("benchmark", help="synthetic accuracy benchmark")
    p.add_argument("--positives", type=int, default=600)
    _add_synth_flags(p)
    p.set_defaults(negatives=600)
    p.add_argument("--calibration", type=int, default=20, help="held-out ERP trials")
    _add_config_flags(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("analyze", help="plot-ready analyses")
    asub = p.add_subparsers(dest="analysis", required=True, parser_class=_Parser)

    a = asub.add_parser("group-delay", help="phase and group delay of a wavelet filter")
    a.add_argument("wavelet")
    a.add_argument("--n-freqs", type=int, default=512)
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_group_delay)

    a = asub.add_parser("scale-energy", help="S(a) of the (averaged) trials")
    a.add_argument("input")
    _add_config_flags(a)
    a.add_argument("--rate", type=float)
    a.add_argument("--truth", help="average only the ERP trials of this truth CSV")
    a.add_argument("--trial", action="append", help="restrict to trial id (repeatable)")
    a.add_argument("--scales", type=_int_pair, default=(1, 128), metavar="LO:HI")
    a.add_argument("--whole", action="store_true", help="sum over the whole trial")
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_scale_energy)

    a = asub.add_parser("calibrate", help="c_tau and analysis scale from labeled trials")
    a.add_argument("input")
    _add_config_flags(a)
    a.add_argument("--rate", type=float)
    a.add_argument("--truth", help="use only the ERP trials of this truth CSV")
    a.add_argument("--trial", action="append")
    a.add_argument("-n", type=int, help="use the first N selected trials")
    a.add_argument("--details", help="also write per-trial peaks here")
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, UnknownWaveletError, SpecError) as exc:
        print(f"erpwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CalibrationError, SplitError) as exc:
        print(f"erpwave: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"erpwave: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
