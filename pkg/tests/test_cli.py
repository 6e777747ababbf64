import json
import os
import statistics
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from diamark import records
from diamark.cli import main
from diamark.imgcore import load_gray, save_gray
from diamark.records import (CSV_COLUMNS, DetectionRecord, RecordFormatError, atomic_write, read_records_csv,
                             records_to_csv)
from diamark.synth import evaluate, read_truth_csv

FIX = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def example_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    spec = resources.files("diamark").joinpath("data/example_scene.cfg")
    assert main(["synth", str(spec), "--out", str(out)]) == 0
    return out


def test_synth_outputs(example_dir, tmp_path):
    img = load_gray(example_dir / "example_scene.png")
    assert (img.width, img.height) == (320, 240)
    assert len(read_truth_csv(example_dir / "example_scene_truth.csv")) == 3
    assert not [p for p in example_dir.iterdir() if p.name.startswith(".")]
    spec = resources.files("diamark").joinpath("data/example_scene.cfg")
    assert main(["synth", str(spec), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "example_scene.png").read_bytes() == (example_dir / "example_scene.png").read_bytes()


def test_synth_out_of_bounds(tmp_path):
    spec = tmp_path / "bad.cfg"
    spec.write_text("scene.width = 60\nscene.height = 60\nmarker.0.center = 5, 30\n")
    assert main(["synth", str(spec), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o" / "bad.png").exists()


def test_detect_and_eval(example_dir, tmp_path):
    out = tmp_path / "det"
    assert main(["detect", str(example_dir / "example_scene.png"), "--out", str(out), "--verbose"]) == 0
    recs = read_records_csv(out / "example_scene.csv")
    truth = read_truth_csv(example_dir / "example_scene_truth.csv")
    rep = evaluate([(r.x, r.y) for r in recs], truth)
    assert rep.false_negatives == 0 and rep.false_positives == 0 and rep.max_error <= 0.1
    doc = json.loads((out / "example_scene.json").read_text())
    assert doc["candidates"] == len(doc["detections"]) + len(doc["rejections"])
    assert doc["candidates"] == len(doc["detections"]) + sum(doc["rejection_counts"].values())
    t = json.loads((out / "example_scene.timings.json").read_text())["timings_ms"]
    assert all(v >= 0 for v in t.values())
    rc = main(["eval", str(out / "example_scene.csv"), str(example_dir / "example_scene_truth.csv"),
               "--out", str(tmp_path / "rep.json")])
    assert rc == 0 and json.loads((tmp_path / "rep.json").read_text())["false_negatives"] == 0
    assert (tmp_path / "rep.txt").read_text().startswith("marker")


def test_detect_byte_identical_across_runs_and_threads(example_dir, tmp_path, monkeypatch):
    img = str(example_dir / "example_scene.png")
    blobs = []
    for i, threads in enumerate(("1", "4", "2")):
        monkeypatch.setenv("DIAMARK_THREADS", threads)
        out = tmp_path / f"r{i}"
        assert main(["detect", img, "--out", str(out), "--verbose"]) == 0
        blobs.append(((out / "example_scene.csv").read_bytes(), (out / "example_scene.json").read_bytes()))
    assert blobs[0] == blobs[1] == blobs[2]


def test_batch_matches_single(example_dir, tmp_path):
    blank = tmp_path / "blank.png"
    save_gray(np.full((64, 64), 0.5), blank)
    single, batch = tmp_path / "s", tmp_path / "b"
    img = str(example_dir / "example_scene.png")
    assert main(["detect", img, "--out", str(single)]) == 0
    assert main(["detect", img, str(blank), "--out", str(batch)]) == 0
    assert (single / "example_scene.csv").read_bytes() == (batch / "example_scene.csv").read_bytes()
    assert read_records_csv(batch / "blank.csv") == []


def test_malformed_config_no_output(example_dir, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("verify.dist_thresh = -1\n")
    out = tmp_path / "never"
    assert main(["detect", str(example_dir / "example_scene.png"), "--config", str(cfg), "--out", str(out)]) == 1
    assert not out.exists()
    cfg.write_text("verify.no_such_key = 1\n")
    assert main(["detect", str(example_dir / "example_scene.png"), "--config", str(cfg), "--out", str(out)]) == 1


def test_io_errors(tmp_path):
    assert main(["detect", str(tmp_path / "missing.png"), "--out", str(tmp_path / "o")]) == 2
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not an image")
    assert main(["detect", str(junk), "--out", str(tmp_path / "o")]) == 2
    assert main(["detect", str(junk), "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["detect"])
    assert e.value.code == 1
    a = tmp_path / "a" / "x.png"
    b = tmp_path / "b" / "x.png"
    for p in (a, b):
        p.parent.mkdir()
        save_gray(np.zeros((8, 8)), p)
    assert main(["detect", str(a), str(b), "--out", str(tmp_path / "o")]) == 1


def test_eval_golden_fixture(tmp_path):
    out = tmp_path / "report.json"
    assert main(["eval", str(FIX / "eval_detections.csv"), str(FIX / "eval_truth.csv"), "--out", str(out)]) == 0
    assert out.read_bytes() == (FIX / "eval_golden.json").read_bytes()


def test_eval_rejects_bad_csv(tmp_path):
    bad = tmp_path / "d.csv"
    bad.write_text("x,y\n1,2\n")
    assert main(["eval", str(bad), str(FIX / "eval_truth.csv"), "--out", str(tmp_path / "r.json")]) == 1


def test_bench_small(tmp_path):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("bench.image_sizes = 32, 40, 48\nbench.repetitions = 2\nbench.scenes = 3\n"
                   "bench.scene_size = 96\nbench.scene_markers = 1\n")
    out = tmp_path / "bench.json"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert len(rep["ncc"]) == 9
    for cell in rep["ncc"]:
        for method in ("fast", "naive"):
            assert cell[method]["median_s"] > 0 and len(cell[method]["raw_s"]) == 2
            assert cell[method]["median_s"] == statistics.median(cell[method]["raw_s"])
        assert cell["speedup"] == pytest.approx(cell["naive"]["median_s"] / cell["fast"]["median_s"])
    e2e = rep["end_to_end"]
    raw = e2e["raw_s"]
    mean = sum(raw) / len(raw)
    sd = (sum((r - mean) ** 2 for r in raw) / (len(raw) - 1)) ** 0.5
    assert e2e["cv"] == pytest.approx(sd / mean, rel=1e-12)
    assert set(rep["speedup_monotone"]) == {"32", "40", "48"}


# --- records ------------------------------------------------------------------------

def test_records_round_trip(tmp_path):
    recs = [DetectionRecord("img", 0, 1.5, 2.25, -90.0, 0.99), DetectionRecord("img", 1, 10.0, 3.0, 45.5, 0.7)]
    p = tmp_path / "r.csv"
    atomic_write(p, records_to_csv(recs))
    assert read_records_csv(p) == recs
    assert p.read_text().splitlines()[1] == ",".join(CSV_COLUMNS)


@pytest.mark.parametrize("text", ["image_id,marker_index,x,y,theta,peak_corr\n",
                                  "# diamark v1\nimage_id,x\n",
                                  "# diamark v1\nimage_id,marker_index,x,y,theta,peak_corr\na,0,1,2,3\n",
                                  "# diamark v1\nimage_id,marker_index,x,y,theta,peak_corr\na,z,1,2,3,4\n"])
def test_bad_records(tmp_path, text):
    p = tmp_path / "r.csv"
    p.write_text(text)
    with pytest.raises(RecordFormatError):
        read_records_csv(p)


def test_atomic_write_cleans_up_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.txt"
    target.write_text("old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(records.os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write(target, "new")
    assert target.read_text() == "old"
    assert sorted(os.listdir(tmp_path)) == ["out.txt"]
