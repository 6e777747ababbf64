from importlib import resources

import numpy as np
import pytest

from diamark.config import PipelineConfig
from diamark.pipeline import (THREADS_ENV, DetectionResult, check_accounting, deduplicate, detect, positions,
                              worker_count)
from diamark.records import records_from_result, records_to_csv
from diamark.subpixel.locate import SubpixelDetection
from diamark.synth import Clutter, evaluate, random_scene, render_scene, scene_from_text


@pytest.fixture(scope="module")
def example():
    spec = scene_from_text(resources.files("diamark").joinpath("data/example_scene.cfg").read_text())
    return render_scene(spec)


def test_example_scene_all_found(example):
    img, truth = example
    res = detect(img)
    check_accounting(res)
    rep = evaluate(res.detections, truth)
    assert rep.false_negatives == 0 and rep.false_positives == 0
    assert rep.max_error <= 0.1
    ys = [(d.y, d.x) for d in res.detections]
    assert ys == sorted(ys)
    assert set(res.timings_ms) == {"preprocess", "screening", "verify+subpixel", "dedup", "total"}
    assert all(v >= 0 for v in res.timings_ms.values())


def test_blank_image_no_detections():
    res = detect(np.full((128, 128), 0.5))
    assert res.detections == [] and res.candidates == len(res.rejections)


def test_image_smaller_than_template():
    img = np.random.default_rng(0).random((16, 16))
    res = detect(img)
    check_accounting(res)
    assert res.detections == []
    assert all(r.stage == "verify" for r in res.rejections)


def test_rejection_trail_accounts_for_every_candidate():
    rng = np.random.default_rng(3)
    img, _ = render_scene(random_scene(rng, clutter=Clutter(6, 4, 3)))
    res = detect(img)
    counts = res.rejection_counts()
    assert res.candidates == len(res.detections) + sum(counts.values())
    assert set(counts) == {"verify", "subpixel", "dedup"}
    for r in res.rejections:
        if r.stage == "verify":
            assert r.reason in ("border", "intersection", "symmetry")
        elif r.stage == "subpixel":
            assert r.reason.split(":")[0] in ("template", "ncc", "correlation", "fit")


def test_thread_count_does_not_change_output(example, monkeypatch):
    img, _ = example
    outs = []
    for n in ("1", "3"):
        monkeypatch.setenv(THREADS_ENV, n)
        res = detect(img)
        outs.append((records_to_csv(records_from_result("x", res)), res.rejections))
    assert outs[0] == outs[1]
    assert records_to_csv(records_from_result("x", detect(img, threads=2))) == outs[0][0]


def test_worker_count(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert worker_count(3) == 3
    assert worker_count(0) >= 1
    monkeypatch.setenv(THREADS_ENV, "5")
    assert worker_count(2) == 5
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.setenv(THREADS_ENV, "-1")
    with pytest.raises(ValueError):
        worker_count()


def _det(x, y, c):
    return SubpixelDetection((x, y), (round(x), round(y)), (0.0, 0.0), c, 90.0, 1)


def test_deduplicate_keeps_best_correlation():
    dets = [_det(10, 10, 0.8), _det(11.5, 10, 0.9), _det(30, 5, 0.7), _det(13.2, 10, 0.85)]
    kept, dropped = deduplicate(dets, 3.0)
    # 11.5 (0.9) wins its neighbourhood; 13.2 is 1.7 px from it and goes too
    assert [(d.x, d.y) for d in kept] == [(30, 5), (11.5, 10)]
    assert sorted(d.x for d in dropped) == [10, 13.2]


def test_check_accounting_detects_mismatch():
    with pytest.raises(AssertionError):
        check_accounting(DetectionResult([], [], 2))


def test_positions_shape():
    assert positions(DetectionResult([], [], 0)).shape == (0, 2)


def test_marker_geometry_scales_verification():
    from diamark.config import MarkerGeometry
    cfg = PipelineConfig(marker=MarkerGeometry(half_size=40.0, line_width=12.0, gsd=4.0))
    assert cfg.verify.marker_halfwidth == 10.0 and cfg.subpixel.line_width == 3.0
