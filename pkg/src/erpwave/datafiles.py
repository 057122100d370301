"""
CSV trial files and truth sidecars.

Wide form, one trial per row::

    # sampling_rate=512
    trial_id,channel,onset_index,sample_0,...,sample_{N-1}

Long form, one sample per row (``onset_index`` column optional)::

    # sampling_rate=512
    trial_id,channel,index,amplitude_uV[,onset_index]

Truth sidecar: ``trial_id,has_erp,n1_index``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .signals import Signal

WIDE_PREFIX = ["trial_id", "channel", "onset_index"]
LONG_HEADER = ["trial_id", "channel", "index", "amplitude_uV"]
TRUTH_HEADER = ["trial_id", "has_erp", "n1_index"]


class DataError(ValueError):
    """Malformed input file; ``line`` is the 1-based line number when known."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)
        self.message = message
        self.line = line


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    channel: str
    signal: Signal


@dataclass(frozen=True)
class TruthRecord:
    trial_id: str
    has_erp: bool
    n1_index: Optional[int] = None


def _float(text, line, what):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{what} {text!r} is not a number", line) from None
    if not math.isfinite(value):
        raise DataError(f"{what} must be finite, got {text!r}", line)
    return value


def _index(text, line, what):
    text = text.strip()
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{what} {text!r} is not an integer", line) from None


def _split_metadata(lines):
    meta = {}
    body = []
    for n, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition("=")
            if sep:
                meta[key.strip()] = (value.strip(), n)
            continue
        body.append((n, raw))
    return meta, body


def _rate(meta, rate):
    if "sampling_rate" in meta:
        text, line = meta["sampling_rate"]
        value = _float(text, line, "sampling_rate")
        if value <= 0:
            raise DataError("sampling_rate must be positive", line)
        if rate is not None and not math.isclose(value, rate):
            raise DataError(f"file sampling_rate {value:g} conflicts with requested {rate:g}", line)
        return value
    if rate is None:
        raise DataError("no sampling_rate metadata row; pass the rate explicitly")
    return float(rate)


def _signal(samples, rate, onset, tid, line):
    try:
        return Signal(samples, rate, onset, tid)
    except ValueError as exc:
        raise DataError(f"trial {tid}: {exc}", line) from None


def parse_trials(text: str, rate: float = None) -> List[TrialRecord]:
    """Parse either CSV form; the layout is recognized from the header."""
    meta, body = _split_metadata(text.splitlines())
    fs = _rate(meta, rate)
    if not body:
        raise DataError("missing header row")
    rows = [(n, r) for n, r in zip((n for n, _ in body), csv.reader(r for _, r in body))]
    head_line, header = rows[0]
    header = [h.strip() for h in header]
    if header[:3] == WIDE_PREFIX:
        return _parse_wide(header, rows[1:], fs, head_line)
    if header[:4] == LONG_HEADER:
        return _parse_long(header, rows[1:], fs)
    raise DataError(f"unrecognized header {','.join(header)!r}", head_line)


def _parse_wide(header, rows, fs, head_line):
    n = len(header) - 3
    for k, name in enumerate(header[3:]):
        if name != f"sample_{k}":
            raise DataError(f"expected column sample_{k}, found {name!r}", head_line)
    out = []
    seen = set()
    for line, row in rows:
        if len(row) != n + 3:
            raise DataError(f"expected {n + 3} fields, found {len(row)}", line)
        tid, channel = row[0].strip(), row[1].strip()
        if not tid:
            raise DataError("empty trial_id", line)
        if (tid, channel) in seen:
            raise DataError(f"duplicate trial {tid} channel {channel}", line)
        seen.add((tid, channel))
        onset = _index(row[2], line, "onset_index")
        samples = [_float(v, line, f"sample_{k}") for k, v in enumerate(row[3:])]
        out.append(TrialRecord(tid, channel, _signal(samples, fs, onset, tid, line)))
    return out


def _parse_long(header, rows, fs):
    has_onset = len(header) > 4 and header[4] == "onset_index"
    width = 5 if has_onset else 4
    groups: Dict[tuple, dict] = {}
    for line, row in rows:
        if len(row) != width:
            raise DataError(f"expected {width} fields, found {len(row)}", line)
        key = (row[0].strip(), row[1].strip())
        if not key[0]:
            raise DataError("empty trial_id", line)
        idx = _index(row[2], line, "index")
        if idx is None or idx < 0:
            raise DataError("index must be a non-negative integer", line)
        g = groups.setdefault(key, {"values": {}, "onset": None, "line": line})
        if idx in g["values"]:
            raise DataError(f"duplicate index {idx} for trial {key[0]}", line)
        g["values"][idx] = _float(row[3], line, "amplitude_uV")
        if has_onset:
            onset = _index(row[4], line, "onset_index")
            if g["onset"] is not None and onset is not None and onset != g["onset"]:
                raise DataError(f"conflicting onset_index for trial {key[0]}", line)
            g["onset"] = onset if onset is not None else g["onset"]
    out = []
    for (tid, channel), g in groups.items():
        values = g["values"]
        if sorted(values) != list(range(len(values))):
            raise DataError(f"trial {tid} has gaps in its sample indices", g["line"])
        samples = [values[i] for i in range(len(values))]
        out.append(TrialRecord(tid, channel, _signal(samples, fs, g["onset"], tid, g["line"])))
    return out


def read_trials(path, rate: float = None) -> List[TrialRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    try:
        return parse_trials(text, rate)
    except DataError as exc:
        raise DataError(exc.message, exc.line, path) from None


def format_trials(records: Sequence[TrialRecord], sampling_rate: float, n_samples: int) -> str:
    """Wide-form CSV; ``n_samples`` fixes the header when there are no records."""
    buf = io.StringIO()
    buf.write(f"# sampling_rate={sampling_rate!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WIDE_PREFIX + [f"sample_{k}" for k in range(n_samples)])
    for r in records:
        if len(r.signal) != n_samples:
            raise ValueError(f"trial {r.trial_id} has {len(r.signal)} samples, expected {n_samples}")
        onset = "" if r.signal.onset_index is None else str(r.signal.onset_index)
        w.writerow([r.trial_id, r.channel, onset] + [repr(float(v)) for v in r.signal.samples])
    return buf.getvalue()


def format_truth(records: Sequence[TruthRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRUTH_HEADER)
    for r in records:
        w.writerow([r.trial_id, int(r.has_erp), "" if r.n1_index is None else r.n1_index])
    return buf.getvalue()


def parse_truth(text: str) -> Dict[str, TruthRecord]:
    lines = text.splitlines()
    rows = list(csv.reader(lines))
    if not rows or [h.strip() for h in rows[0]] != TRUTH_HEADER:
        raise DataError(f"truth header must be {','.join(TRUTH_HEADER)}", 1)
    out = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DataError(f"expected 3 fields, found {len(row)}", line)
        tid = row[0].strip()
        flag = row[1].strip().lower()
        if flag not in ("0", "1", "true", "false"):
            raise DataError(f"has_erp must be 0/1, got {row[1]!r}", line)
        has = flag in ("1", "true")
        n1 = _index(row[2], line, "n1_index")
        if has and n1 is None:
            raise DataError(f"trial {tid} has an ERP but no n1_index", line)
        if tid in out:
            raise DataError(f"duplicate trial_id {tid}", line)
        out[tid] = TruthRecord(tid, has, n1)
    return out


def read_truth(path) -> Dict[str, TruthRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    try:
        return parse_truth(text)
    except DataError as exc:
        raise DataError(exc.message, exc.line, path) from None


def write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
