import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from lvc_bench.cli import main
from lvc_bench.datamodel import parse_ground_truth

GT = {
    "v1": {"duration": 30.0, "timestamps": [[0.0, 7.0], [5.0, 12.0], [20.0, 24.0]],
           "sentences": ["A man runs down the street.", "A dog barks at the man.", "The man waves goodbye."]},
    "v2": {"duration": 20.0, "timestamps": [[2.0, 18.0]], "sentences": ["People dance on a stage."]},
}


def identity_preds(gt=GT):
    return {"results": {vid: [{"sentence": s, "timestamp": t, "score": 0.9}
                              for s, t in zip(e["sentences"], e["timestamps"])] for vid, e in gt.items()}}


@pytest.fixture
def files(tmp_path):
    gt = tmp_path / "gt.json"
    gt.write_text(json.dumps(GT))
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps(identity_preds()))
    return str(gt), str(pred), tmp_path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def without_timestamp(blob):
    doc = json.loads(blob)
    doc.pop("created_utc")
    return doc


# eval-offline

def test_offline_identity(files):
    gt, pred, tmp = files
    assert main(["eval-offline", gt, pred, "--scorer", "BLEU4,ROUGE_L", "--out", str(tmp / "o")]) == 0
    rows = read_csv(tmp / "o" / "offline_report.csv")
    corpus = rows[0]
    assert corpus["video_id"] == "__corpus__"
    for key in ("recall@0.3", "precision@0.9", "precision_avg", "caption_BLEU4", "caption_ROUGE_L"):
        assert float(corpus[key]) == 100.0
    report = json.loads((tmp / "o" / "offline_report.json").read_text())
    assert report["manifest"] == "manifest.json"
    manifest = json.loads((tmp / "o" / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"offline_report.csv", "offline_report.json"}
    assert manifest["inputs"]["ground_truth"]["sha256"]


def test_offline_malformed_json(files, capsys):
    _, pred, tmp = files
    bad = tmp / "bad.json"
    bad.write_text("{not json")
    assert main(["eval-offline", str(bad), pred, "--out", str(tmp / "o")]) == 2
    assert "input error" in capsys.readouterr().err


def test_offline_unknown_scorer_no_outputs(files):
    gt, pred, tmp = files
    assert main(["eval-offline", gt, pred, "--scorer", "CIDER", "--out", str(tmp / "o")]) == 4
    assert not (tmp / "o").exists()


def test_offline_id_mismatch(files):
    gt, _, tmp = files
    other = tmp / "other.json"
    other.write_text(json.dumps({"results": {"zzz": [{"sentence": "x", "timestamp": [0, 1], "score": 1}]}}))
    assert main(["eval-offline", gt, str(other), "--out", str(tmp / "o")]) == 3


def test_missing_file(files):
    _, pred, tmp = files
    assert main(["eval-offline", str(tmp / "nope.json"), pred, "--out", str(tmp / "o")]) == 2


def test_argparse_errors_are_usage(files):
    gt, pred, tmp = files
    with pytest.raises(SystemExit) as exc:
        main(["eval-live", gt, pred, "--window", "abc", "--out", str(tmp / "o")])
    assert exc.value.code == 4
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 4


# eval-live

def live(files, *extra, out="live"):
    gt, pred, tmp = files
    code = main(["eval-live", gt, pred, "--out", str(tmp / out), *extra])
    return code, tmp / out


def test_live_default_sweep(files):
    code, out = live(files)
    assert code == 0
    rows = read_csv(out / "live_summary.csv")
    assert list(rows[0]) == ["variant", "scorer"] + [f"dt_{d}" for d in (24, 48, 72, 96, 120, 150)]
    assert [r["variant"] for r in rows] == ["ls", "wls", "hls", "hwls"]
    assert (out / "series" / "dt_48" / "BLEU4" / "v1.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["window"] == 5
    assert manifest["config"]["window_normalization"] == "paper"
    assert "series/dt_150/BLEU4/v2.csv" in manifest["outputs"]


def test_live_perfect_stream_summary(tmp_path):
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps(GT))
    synth = tmp_path / "synth.json"
    assert main(["synth", str(gt_path), "--dt-seconds", "5", "--quality", "1", "--out", str(synth)]) == 0
    assert main(["eval-live", str(gt_path), str(synth), "--dt-seconds", "5", "--scorer", "ROUGE_L",
                 "--out", str(tmp_path / "o")]) == 0
    # v1: slots 1,2,3,5 of 6 carry references; v2: all 4 slots do
    for vid, frac in (("v1", 4 / 6), ("v2", 1.0)):
        rows = read_csv(tmp_path / "o" / "series" / "dt_5s" / "ROUGE_L" / f"{vid}.csv")
        assert float(rows[-1]["ls"]) == pytest.approx(100 * frac, abs=1e-6)
    summary = json.loads((tmp_path / "o" / "live_summary.json").read_text())
    per_video = summary["per_video"]["v1"]["dt_5s"]["ROUGE_L"]["ls"]
    assert per_video == pytest.approx(100 * (1 + 1 + 1 + 3 / 4 + 4 / 5 + 4 / 6) / 6)


def test_live_huge_window_equals_ls(files):
    code, out = live(files, "--dt", "48", "--window", "1000000")
    assert code == 0
    for vid in ("v1", "v2"):
        for row in read_csv(out / "series" / "dt_48" / "BLEU4" / f"{vid}.csv"):
            assert row["hls"] == row["ls"]
            assert row["hwls"] == row["wls"]


def test_live_norm_modes_isolated(tmp_path):
    gt = {"v": {"duration": 40.0, "timestamps": [[0, 40]], "sentences": ["a man runs down the street"]}}
    pred = {"results": {"v": [{"sentence": "a man runs", "timestamp": [0, 9], "score": 1},
                              {"sentence": "a man walks", "timestamp": [22, 29], "score": 1}]}}
    (tmp_path / "gt.json").write_text(json.dumps(gt))
    (tmp_path / "p.json").write_text(json.dumps(pred))
    args = ["eval-live", str(tmp_path / "gt.json"), str(tmp_path / "p.json"), "--dt-seconds", "5", "--window", "2"]
    assert main(args + ["--norm", "paper", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--norm", "effective", "--out", str(tmp_path / "b")]) == 0
    a = read_csv(tmp_path / "a" / "series" / "dt_5s" / "BLEU4" / "v.csv")
    b = read_csv(tmp_path / "b" / "series" / "dt_5s" / "BLEU4" / "v.csv")
    for col in ("gamma", "fp", "ls", "wls"):
        assert [r[col] for r in a] == [r[col] for r in b]
    assert [r["hls"] for r in a] != [r["hls"] for r in b]


def test_live_deterministic_and_jobs(files, monkeypatch):
    _, a = live(files, "--dt", "48", "--dt", "96", out="a")
    _, b = live(files, "--dt", "48", "--dt", "96", "--jobs", "2", out="b")
    monkeypatch.setenv("LVC_BENCH_JOBS", "3")
    _, c = live(files, "--dt", "48", "--dt", "96", out="c")
    ta, tb, tc = tree(a), tree(b), tree(c)
    for t in (tb, tc):
        assert set(t) == set(ta)
        for name in ta:
            if name == "manifest.json":
                assert without_timestamp(t[name]) == without_timestamp(ta[name])
            else:
                assert t[name] == ta[name]


def test_live_usage_errors_leave_nothing(files, monkeypatch):
    for extra in (["--window", "0"], ["--norm", "sideways"], ["--dt", "0"], ["--fps", "-3"],
                  ["--dt", "48", "--dt-seconds", "2"], ["--scale", "huge"], ["--jobs", "0"]):
        code, out = live(files, *extra, out="x")
        assert code == 4, extra
        assert not out.exists()
    monkeypatch.setenv("LVC_BENCH_JOBS", "many")
    code, out = live(files, out="x")
    assert code == 4


def test_live_bad_input_exit_2(files):
    gt, _, tmp = files
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({"results": {"v1": [{"sentence": "x", "timestamp": [5, 2], "score": 1}]}}))
    assert main(["eval-live", gt, str(bad), "--dt", "48", "--out", str(tmp / "o")]) == 2


# split-annotations

def test_split_cli(tmp_path):
    gt = {"v": {"duration": 80.0, "timestamps": [[10, 70]], "sentences": ["a man runs"]}}
    src = tmp_path / "gt.json"
    src.write_text(json.dumps(gt))
    once, twice = tmp_path / "s1.json", tmp_path / "s2.json"
    assert main(["split-annotations", str(src), "--dt-seconds", "5", "--out", str(once)]) == 0
    assert len(json.loads(once.read_text())["v"]["timestamps"]) == 12
    assert main(["split-annotations", str(once), "--dt-seconds", "5", "--out", str(twice)]) == 0
    assert once.read_bytes() == twice.read_bytes()
    big = tmp_path / "big.json"
    assert main(["split-annotations", str(once), "--dt", "3000", "--out", str(big)]) == 0
    assert parse_ground_truth(big.read_bytes()) == parse_ground_truth(once.read_bytes())


def test_split_requires_dt(files):
    gt, _, tmp = files
    assert main(["split-annotations", gt, "--out", str(tmp / "s.json")]) == 4
    assert not (tmp / "s.json").exists()


# replay-audit

def test_replay_audit_clean(files):
    gt, pred, tmp = files
    out = tmp / "r"
    assert main(["replay-audit", pred, "--dt", "48", "--memory", "1", "--gt", gt, "--out", str(out)]) == 0
    assert (out / "logs" / "v1.jsonl").exists()
    report = json.loads((out / "audit.json").read_text())
    assert all(r["kind"] == "TIMELINESS" for r in report)


def test_replay_consolidate_counts(files):
    gt, pred, tmp = files
    assert main(["replay-audit", pred, "--dt", "150", "--memory", "3", "--out", str(tmp / "raw")]) == 0
    assert main(["replay-audit", pred, "--dt", "150", "--memory", "3", "--consolidate",
                 "--out", str(tmp / "merged")]) == 0
    for vid in ("v1", "v2"):
        raw = (tmp / "raw" / "logs" / f"{vid}.jsonl").read_text().splitlines()
        merged = (tmp / "merged" / "logs" / f"{vid}.jsonl").read_text().splitlines()
        for r, m in zip(raw, merged):
            assert len(json.loads(m)["tuples"]) <= len(json.loads(r)["tuples"])


def test_audit_only_injected_breach(files):
    _, pred, tmp = files
    assert main(["replay-audit", pred, "--dt", "150", "--out", str(tmp / "r")]) == 0
    log = tmp / "r" / "logs" / "v1.jsonl"
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    lines[0]["tuples"].append({"s": 1.0, "e": lines[0]["t"] + 1, "sentence": "from the future", "score": 0.5})
    bad = tmp / "bad.jsonl"
    bad.write_text("".join(json.dumps(x) + "\n" for x in lines))
    assert main(["replay-audit", "--log", str(bad), "--dt", "150", "--out", str(tmp / "a")]) == 5
    report = json.loads((tmp / "a" / "audit.json").read_text())
    assert [r["kind"] for r in report] == ["CAUSALITY"]
    clean = tmp / "r" / "logs" / "v2.jsonl"
    assert main(["replay-audit", "--log", str(clean), "--dt", "150", "--out", str(tmp / "b")]) == 0


def test_audit_only_unsorted_log(tmp_path):
    log = tmp_path / "l.jsonl"
    log.write_text('{"n": 2, "t": 10.0, "tuples": []}\n{"n": 1, "t": 5.0, "tuples": []}\n')
    assert main(["replay-audit", "--log", str(log), "--dt-seconds", "5", "--out", str(tmp_path / "o")]) == 2


def test_replay_usage(files):
    gt, pred, tmp = files
    assert main(["replay-audit", pred, "--dt", "48", "--memory", "0", "--out", str(tmp / "r")]) == 4
    assert main(["replay-audit", "--dt", "48", "--out", str(tmp / "r")]) == 4
    assert main(["replay-audit", pred, "--log", pred, "--dt", "48", "--out", str(tmp / "r")]) == 4
    assert not (tmp / "r").exists()


# synth

def test_synth_deterministic(files):
    gt, _, tmp = files
    a, b = tmp / "a.json", tmp / "b.json"
    for out in (a, b):
        assert main(["synth", gt, "--dt", "48", "--quality", "0.5", "--fp-rate", "1", "--seed", "3",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["synth", gt, "--dt", "48", "--quality", "2", "--out", str(tmp / "c.json")]) == 4


def test_console_entry_point(files):
    gt, pred, tmp = files
    proc = subprocess.run([sys.executable, "-m", "lvc_bench.cli", "eval-offline", gt, pred,
                           "--scorer", "ROUGE_L", "--out", str(tmp / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "avg precision 100.00" in proc.stdout
