import csv
import json

import numpy as np
import pytest

from erpwave.cli import main
from erpwave.config import DetectorConfig
from erpwave.datafiles import read_trials, read_truth
from erpwave.scale_select import prepare, search_bounds
from erpwave.synth import make_corpus
from erpwave.wavelets import cwt, load_wavelet

PER_TRIAL_KEYS = {"trial_id", "channel", "present", "start_ms", "end_ms", "p1", "n1", "p2",
                  "score", "best_scale", "retried"}


def run(argv, capsys):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def synth_file(tmp_path, capsys):
    path = tmp_path / "trials.csv"
    code, _, _ = run(["synth", "--count", 10, "--negatives", 4, "--seed", 7, "--out", path], capsys)
    assert code == 0
    return path


def test_synth_is_byte_identical(tmp_path, capsys):
    for name in ("a.csv", "b.csv"):
        assert run(["synth", "--count", 10, "--seed", 7, "--out", tmp_path / name], capsys)[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.truth.csv").read_bytes() == (tmp_path / "b.truth.csv").read_bytes()


def test_synth_count_zero_is_header_only(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    assert run(["synth", "--count", 0, "--out", path], capsys)[0] == 0
    lines = path.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("trial_id,channel,onset_index,sample_0,")
    assert (tmp_path / "empty.truth.csv").read_text() == "trial_id,has_erp,n1_index\n"


def test_synth_rejects_n1_outside_window(tmp_path, capsys):
    code, _, err = run(["synth", "--count", 1, "--n1-latency", 300, "--out", tmp_path / "x.csv"],
                       capsys)
    assert code == 1
    assert "n1_latency" in err


def test_round_trip_matches_generator(synth_file):
    recs = read_trials(synth_file)
    corpus = make_corpus(10, 4, seed=7)
    assert len(recs) == len(corpus) == 14
    for r, t in zip(recs, corpus):
        assert np.max(np.abs(r.signal.samples - t.signal.samples)) <= 1e-9
        assert r.signal.onset_index == t.signal.onset_index
    truth = read_truth(str(synth_file).replace(".csv", ".truth.csv"))
    assert sum(t.has_erp for t in truth.values()) == 10


def test_detect_output_schema_and_echo(synth_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"c_tau": 40.0, "padding_ms": 12.0}))
    out = tmp_path / "run.json"
    code, _, _ = run(["detect", synth_file, "--config", cfg, "--wavelet", "db4", "--out", out], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    expected = DetectorConfig(c_tau=40.0, padding_ms=12.0, wavelet="db4").to_dict()
    assert doc["config_echo"] == expected
    assert len(doc["per_trial"]) == 14
    for entry in doc["per_trial"]:
        assert set(entry) == PER_TRIAL_KEYS
        if not entry["present"]:
            assert entry["start_ms"] == entry["end_ms"] == 0
            assert entry["p1"] is entry["n1"] is entry["p2"] is None
    assert [e["trial_id"] for e in doc["per_trial"]] == [f"trial_{i:04d}" for i in range(14)]


def test_detect_zero_trial(tmp_path, capsys):
    path = tmp_path / "zero.csv"
    path.write_text("# sampling_rate=512\ntrial_id,channel,onset_index,"
                    + ",".join(f"sample_{k}" for k in range(512)) + "\n"
                    + "z,0,100," + ",".join("0" for _ in range(512)) + "\n")
    code, out, _ = run(["detect", path], capsys)
    assert code == 0
    entry = json.loads(out)["per_trial"][0]
    assert entry["present"] is False and entry["start_ms"] == 0 and entry["end_ms"] == 0


def test_detect_malformed_row(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("# sampling_rate=512\ntrial_id,channel,onset_index,sample_0\na,0,,1.0\nb,0,,x\n")
    code, _, err = run(["detect", path], capsys)
    assert code == 2
    assert "line 4" in err


def test_usage_and_config_errors(tmp_path, capsys):
    assert run(["detect"], capsys)[0] == 1
    assert run(["detect", "x.csv", "--scale-band", "40"], capsys)[0] == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    code, _, err = run(["detect", "x.csv", "--config", cfg], capsys)
    assert code == 1 and "no_such_key" in err
    assert run(["detect", tmp_path / "missing.csv"], capsys)[0] == 2


def test_detect_high_snr_corpus(tmp_path, capsys):
    path = tmp_path / "hi.csv"
    run(["synth", "--count", 200, "--seed", 3, "--snr", 12, "--out", path], capsys)
    cal = tmp_path / "cal.json"
    assert run(["analyze", "calibrate", path, "-n", 20, "--out", cal], capsys)[0] == 0
    code, out, _ = run(["detect", path, "--config", cal], capsys)
    assert code == 0
    present = [e["present"] for e in json.loads(out)["per_trial"]]
    assert sum(present) / len(present) >= 0.99


def test_detect_with_truth_adds_report(synth_file, capsys):
    truth = str(synth_file).replace(".csv", ".truth.csv")
    code, out, err = run(["detect", synth_file, "--truth", truth, "--c-tau", 40], capsys)
    assert code == 0
    report = json.loads(out)["report"]
    assert report["tp"] + report["fn"] == 10 and report["tn"] + report["fp"] == 4
    assert "ERP present" in err


def test_group_delay_haar(capsys):
    code, out, _ = run(["analyze", "group-delay", "haar", "--n-freqs", 128], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 128
    assert all(abs(float(r["group_delay"]) - 0.5) < 1e-9 for r in rows)


def test_group_delay_db4(capsys):
    _, out, _ = run(["analyze", "group-delay", "db4"], capsys)
    tau = [float(r["group_delay"]) for r in csv.DictReader(out.splitlines()) if r["group_delay"]]
    assert max(tau) - min(tau) > 0.1


def test_group_delay_unknown_wavelet(capsys):
    code, _, err = run(["analyze", "group-delay", "unknownX"], capsys)
    assert code == 1 and "unknownX" in err


def test_calibrate_matches_recomputation(tmp_path, capsys):
    path = tmp_path / "lab.csv"
    run(["synth", "--count", 20, "--seed", 5, "--out", path], capsys)
    details = tmp_path / "details.json"
    code, out, _ = run(["analyze", "calibrate", path, "--details", details], capsys)
    assert code == 0
    update = json.loads(out)
    assert set(update) == {"c_tau", "analysis_scale"}
    cfg = DetectorConfig(analysis_scale=update["analysis_scale"])
    spec = load_wavelet(cfg.wavelet)
    peaks = []
    for r in read_trials(path):
        x = prepare(r.signal, cfg)
        row = cwt(x, spec, [cfg.analysis_scale]).coefficients[0]
        lo, hi = search_bounds(len(x), x.sampling_rate, x.onset_index, cfg.calibration_window_ms)
        peaks.append(row[lo:hi].max())
    assert update["c_tau"] == pytest.approx(0.5 * np.mean(peaks), rel=1e-12)
    assert json.loads(details.read_text())["n_trials"] == 20


def test_calibrate_without_onset_is_data_error(tmp_path, capsys):
    path = tmp_path / "no_onset.csv"
    path.write_text("# sampling_rate=512\ntrial_id,channel,onset_index,"
                    + ",".join(f"sample_{k}" for k in range(512)) + "\n"
                    + "z,0,," + ",".join("1" for _ in range(512)) + "\n")
    assert run(["analyze", "calibrate", path], capsys)[0] == 2


def test_scale_energy_output(synth_file, capsys):
    truth = str(synth_file).replace(".csv", ".truth.csv")
    code, out, err = run(["analyze", "scale-energy", synth_file, "--truth", truth,
                          "--scales", "30:100"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [float(r["scale"]) for r in rows] == list(range(30, 101))
    assert "best scale" in err


def test_benchmark_small_run_is_deterministic(tmp_path, capsys):
    args = ["benchmark", "--positives", 10, "--negatives", 10, "--calibration", 5, "--seed", 4]
    code, first, err = run(args, capsys)
    assert code == 0 and "Overall" in err
    second = run(args, capsys)[1]
    assert first == second
    doc = json.loads(first)
    assert len(doc["per_trial"]) == 20 and doc["calibration"]["n_trials"] == 5
    assert doc["config_echo"]["c_tau"] == doc["calibration"]["c_tau"]


def test_benchmark_split_error(capsys):
    code, _, err = run(["benchmark", "--positives", 0, "--negatives", 0, "--calibration", 3], capsys)
    assert code == 2 and "no trials left" in err
