"""The ten acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from erpwave.cli import main
from erpwave.config import DetectorConfig
from erpwave.detector import detect, gaussian_weight, proximity_detect
from erpwave.scale_select import cone_of_influence
from erpwave.signals import Signal
from erpwave.synth import TrialSpec, make_background, make_trial
from erpwave.wavelets import (SUPPORTED_WAVELETS, cwt, fir_group_delay, frequency_grid,
                              group_delay, load_wavelet, scaled_wavelet)

from conftest import record
from oracles import brute_force_pairs, smooth_row

FS = 512.0
WORKERS = os.cpu_count()


def test_criterion_01_filter_phase():
    t0 = time.perf_counter()
    haar = group_delay(load_wavelet("haar"), 512)
    haar_err = float(np.max(np.abs(haar.group_delay[haar.defined] - 0.5)))
    db4 = group_delay(load_wavelet("db4"), 512)
    db4_range = float(np.ptp(db4.group_delay[db4.defined]))
    rng = np.random.default_rng(1)
    flat = 0.0
    for _ in range(50):
        half = rng.standard_normal(int(rng.integers(1, 16)))
        taps = np.concatenate([half, half[::-1]]) if rng.random() < 0.5 else \
            np.concatenate([half, rng.standard_normal(1), half[::-1]])
        prof = fir_group_delay(taps, 512)
        tau = prof.group_delay[prof.defined]
        flat = max(flat, float(np.ptp(tau)) if tau.size else 0.0)
    elapsed = time.perf_counter() - t0
    ok = haar_err < 1e-6 and db4_range > 0.1 and flat < 1e-6 and elapsed < 1.0
    record(1, ok, f"haar |tau-0.5| {haar_err:.1e}, db4 range {db4_range:.3f}, "
                  f"symmetric spread {flat:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_group_delay_oracle():
    worst = 0.0
    n = 512
    omega = frequency_grid(n)
    d = 1e-5
    for name in SUPPORTED_WAVELETS:
        h = load_wavelet(name).lowpass
        k = np.arange(len(h))

        def phase(w):
            return np.unwrap(np.angle(np.exp(-1j * np.outer(w, k)) @ h))

        fd = -(phase(omega + d) - phase(omega - d)) / (2 * d)
        prof = group_delay(load_wavelet(name), n)
        ok_pts = np.abs(np.exp(-1j * np.outer(omega, k)) @ h) > 1e-3
        worst = max(worst, float(np.max(np.abs(prof.group_delay[ok_pts] - fd[ok_pts]))))
    ok = worst < 1e-4
    record(2, ok, f"max |FIR identity - finite difference| {worst:.1e} samples "
                  f"over {len(SUPPORTED_WAVELETS)} wavelets")
    assert ok


def test_criterion_03_cwt_self_matching():
    t0 = time.perf_counter()
    spec = load_wavelet("sym5")
    scales = np.arange(1, 129, dtype=float)
    m = 256
    results = []
    for a0 in (16, 32, 48, 64):
        kernel = scaled_wavelet("sym5", a0)
        half = (len(kernel) - 1) // 2
        x = np.zeros(int(FS))
        pos = np.arange(len(kernel)) + m - half
        inside = (pos >= 0) & (pos < len(x))
        x[pos[inside]] = kernel[inside]
        C = cwt(Signal(x, FS), spec, scales)
        cone = cone_of_influence(C, 0.5 * float(np.abs(C.coefficients).max()), 50.0, 0.8)
        results.append((a0, cone.peak_scale, cone.peak_time_index))
    elapsed = time.perf_counter() - t0
    ok = all(abs(s - a0) <= 2 and abs(b - m) <= 3 for a0, s, b in results) and elapsed < 5.0
    record(3, ok, ", ".join(f"{a0}->{s:g}@{b}" for a0, s, b in results) + f", {elapsed:.2f} s")
    assert ok


def test_criterion_04_proximity_brute_force():
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(1000):
        row = smooth_row(rng) * rng.uniform(0.1, 10)
        cfg = DetectorConfig(c_tau=float(rng.uniform(0, 2)) * float(np.std(row)),
                             threshold_mode=str(rng.choice(["positive", "symmetric"])))
        pairs = proximity_detect(row, cfg, FS)
        expected = brute_force_pairs(row, cfg, FS)
        if not expected:
            mismatches += bool(pairs)
            continue
        best = max(expected, key=lambda e: (e[0], -e[1], -e[2]))
        if not pairs or (pairs[0].neg_index, pairs[0].pos_index) != best[1:] \
                or not math.isclose(pairs[0].score, best[0], rel_tol=1e-12):
            mismatches += 1
    record(4, mismatches == 0, f"{mismatches} mismatches in 1000 rows")
    assert mismatches == 0


def test_criterion_05_gaussian_weight():
    cases = [(70, 1.0), (79, math.exp(-0.5)), (61, math.exp(-0.5)), (88, math.exp(-2)),
             (52, math.exp(-2))]
    worst = max(abs(gaussian_weight(p, 70, 9) - v) for p, v in cases)
    record(5, worst <= 1e-12, f"max error {worst:.1e}")
    assert worst <= 1e-12


def run_benchmark_cli(path):
    t0 = time.perf_counter()
    code = main(["benchmark", "--positives", "600", "--negatives", "600", "--calibration", "20",
                 "--seed", "2024", "--workers", str(WORKERS), "--out", str(path)])
    return code, time.perf_counter() - t0


@pytest.fixture(scope="module")
def benchmark_runs(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    first, second = d / "run1.json", d / "run2.json"
    code1, t1 = run_benchmark_cli(first)
    code2, _ = run_benchmark_cli(second)
    assert code1 == code2 == 0
    return first, second, t1


def test_criterion_06_synthetic_benchmark(benchmark_runs):
    path, _, elapsed = benchmark_runs
    report = json.loads(path.read_text())["report"]
    hit, rej, overall = report["hit_rate"], report["rejection_rate"], report["overall"]
    med = report["median_latency_error_ms"]
    ok = (report["tp"] + report["fn"] == 600 and report["tn"] + report["fp"] == 600
          and hit >= 0.90 and rej >= 0.85 and overall >= 0.88
          and med is not None and med <= 10.0 and elapsed < 180.0)
    record(6, ok, f"hit {100 * hit:.1f}% (>=90), rejection {100 * rej:.1f}% (>=85), "
                  f"overall {100 * overall:.2f}% (>=88), median latency error {med:.2f} ms, "
                  f"{elapsed:.0f} s")
    assert ok


def test_criterion_07_resting_segments(benchmark_runs):
    cfg = DetectorConfig.from_dict(json.loads(benchmark_runs[0].read_text())["config_echo"])
    false_pos = 0
    for i in range(400):
        seg = make_background(2000.0, FS, 700_000 + i)
        false_pos += detect(seg, cfg).present
    rate = false_pos / 400
    record(7, rate <= 0.05, f"false positives {false_pos}/400 = {100 * rate:.1f}% (<=5)")
    assert rate <= 0.05


def test_criterion_08_latency_budget():
    spec = TrialSpec(seed=8, duration_ms=600 / FS * 1000.0, onset_ms=200.0)
    trial = make_trial(spec).signal
    cfg = DetectorConfig(scale_band=(40, 89), c_tau=40.0, analysis_scale=60.0)
    assert len(trial) == 600 and cfg.scale_band[1] - cfg.scale_band[0] + 1 == 50
    detect(trial, cfg)
    times = []
    for _ in range(25):
        t0 = time.perf_counter()
        detect(trial, cfg)
        times.append(time.perf_counter() - t0)
    med = 1000.0 * float(np.median(times))
    record(8, med < 100.0, f"median {med:.1f} ms per 600-sample trial, 50 scales")
    assert med < 100.0


def test_criterion_09_determinism(benchmark_runs):
    first, second, _ = benchmark_runs
    same = first.read_bytes() == second.read_bytes()
    record(9, same, f"RunOutput JSON byte-identical across runs: {same} "
                    f"({len(first.read_bytes())} bytes)")
    assert same


def test_criterion_10_threshold_monotonicity():
    rng = np.random.default_rng(10)
    violations = 0
    for _ in range(200):
        row = smooth_row(rng)
        mode = str(rng.choice(["positive", "symmetric"]))
        c = float(rng.uniform(0, 2))
        base = {(p.neg_index, p.pos_index)
                for p in proximity_detect(row, DetectorConfig(c_tau=c, threshold_mode=mode), FS)}
        for delta in rng.uniform(1e-9, 2.0, size=5):
            cfg = DetectorConfig(c_tau=c + float(delta), threshold_mode=mode)
            raised = {(p.neg_index, p.pos_index) for p in proximity_detect(row, cfg, FS)}
            violations += not raised <= base
    record(10, violations == 0, f"{violations} subset violations in 200 rows x 5 deltas")
    assert violations == 0
