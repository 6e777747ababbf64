import itertools
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diamark.kvtext import ConfigError
from diamark.synth import (Clutter, GroundTruth, MarkerSpec, SceneError, SceneSpec, evaluate, line_gap,
                           random_scene, read_truth_csv, render_scene, scene_from_text, scene_to_text, shifted,
                           truth_to_csv, wrap180, write_truth_csv)
from diamark.verify import annular_scan, check_symmetry


def test_clean_marker_is_centrally_symmetric():
    img, truth = render_scene(SceneSpec(200, 200, (MarkerSpec((100.0, 100.0), blur_sigma=0.0),)))
    assert (truth[0].x, truth[0].y) == (100.0, 100.0)
    assert check_symmetry(annular_scan(img, (100, 100), 15.0))


def test_same_seed_bit_identical():
    spec = random_scene(np.random.default_rng(5), clutter=Clutter(3, 2, 1))
    a, _ = render_scene(spec)
    b, _ = render_scene(spec)
    assert np.array_equal(a.data, b.data)


def test_supersampling_converges():
    m = MarkerSpec((60.3, 58.7), 25.0, 110.0, blur_sigma=0.7)
    a, _ = render_scene(SceneSpec(120, 120, (m,), supersample=8))
    b, _ = render_scene(SceneSpec(120, 120, (m,), supersample=16))
    assert np.max(np.abs(a.data - b.data)) <= 0.01


@pytest.mark.parametrize("delta", [0.1, 0.25, 0.5])
def test_subpixel_shift_moves_centroid(delta):
    base = SceneSpec(100, 100, (MarkerSpec((50.2, 49.6), 30.0, 120.0, line_level=0.15, bg_level=0.85,
                                           blur_sigma=0.0),), background=0.5)
    out = []
    for spec in (base, shifted(base, delta, 0.0)):
        img, _ = render_scene(spec)
        w = np.abs(img.data - 0.5)
        yy, xx = np.mgrid[0:100, 0:100]
        out.append(((w * xx).sum() / w.sum(), (w * yy).sum() / w.sum()))
    assert out[1][0] - out[0][0] == pytest.approx(delta, abs=0.02)
    assert out[1][1] == pytest.approx(out[0][1], abs=0.02)


def test_distinct_seeds_decorrelate():
    a, _ = render_scene(SceneSpec(100, 100, noise_sigma=0.05, seed=1))
    b, _ = render_scene(SceneSpec(100, 100, noise_sigma=0.05, seed=2))
    r = np.corrcoef(a.data.ravel(), b.data.ravel())[0, 1]
    assert abs(r) < 0.05


def test_homography_moves_truth():
    spec = SceneSpec(200, 200, (MarkerSpec((80.0, 90.0), 0.0, 90.0),), warp=(1, 0, 10, 0, 1, -5, 0, 0, 1))
    g = render_scene(spec)[1][0]
    assert (g.x, g.y) == pytest.approx((90.0, 85.0))
    shear = SceneSpec(200, 200, (MarkerSpec((50.0, 60.0), 0.0, 90.0),), warp=(1, 1, 0, 0, 1, 0, 0, 0, 1))
    g = render_scene(shear)[1][0]
    assert g.phi1 == pytest.approx(0.0) and g.phi2 == pytest.approx(45.0)


def test_out_of_bounds_marker():
    with pytest.raises(SceneError):
        render_scene(SceneSpec(100, 100, (MarkerSpec((10.0, 50.0)),)))


@pytest.mark.parametrize("kw", [{"phi1": 0, "phi2": 10}, {"line_level": 0.5, "bg_level": 0.55},
                                {"line_level": 1.5}, {"style": "ring"}, {"blur_sigma": -1}])
def test_marker_validation(kw):
    with pytest.raises(ValueError):
        MarkerSpec((50.0, 50.0), **kw)


def test_thin_cross_style_renders_lines():
    img, _ = render_scene(SceneSpec(100, 100, (MarkerSpec((50.0, 50.0), 0.0, 90.0, style="thin-cross",
                                                          line_level=0.1, bg_level=0.9, blur_sigma=0.0),)))
    assert img.data[50, 60] == pytest.approx(0.1) and img.data[40, 60] == pytest.approx(0.9)


def test_clutter_stays_out_of_marker():
    rng = np.random.default_rng(8)
    for _ in range(3):
        spec = random_scene(rng, n_markers=1, clutter=Clutter(6, 4, 3), noise_sigma=0.0)
        spec_no_clutter = SceneSpec(spec.width, spec.height, spec.markers, illum_gradient=spec.illum_gradient)
        a, g = render_scene(spec)
        b, _ = render_scene(spec_no_clutter)
        yy, xx = np.mgrid[0:256, 0:256]
        core = np.hypot(xx - g[0].x, yy - g[0].y) <= 18
        assert np.max(np.abs(a.data[core] - b.data[core])) < 1e-6


def test_angles():
    assert wrap180(-30.0) == 150.0 and wrap180(360.0) == 0.0
    assert line_gap(10.0, 170.0) == pytest.approx(20.0)


# --- evaluation -----------------------------------------------------------------

T = [GroundTruth(0, 10.0, 10.0, 30.0, 120.0), GroundTruth(1, 50.0, 50.0, 0.0, 70.0)]


def test_exact_hit():
    r = evaluate([(10.0, 10.0, -90.0)], T[:1])
    assert r.markers[0].matched and r.markers[0].error == 0.0 and r.markers[0].theta_error == 0.0
    assert r.frac_within_0_1 == 1.0 and r.false_positives == 0


def test_theta_error_ignores_line_order():
    r = evaluate([(10.0, 10.0, 90.0)], T[:1])
    assert r.markers[0].theta_error == pytest.approx(0.0)


def test_radius_rule():
    r = evaluate([(15.0, 10.0)], T[:1], match_radius=3)
    assert r.false_positives == 1 and r.false_negatives == 1 and r.mean_error is None


def test_empty_detections():
    three = T + [GroundTruth(2, 90.0, 90.0, 0.0, 90.0)]
    r = evaluate([], three)
    assert r.false_negatives == 3 and r.frac_within_0_1 == 0.0


def brute_assign(dets, truths, radius):
    """Exhaustive oracle: among all maximal matchings, the one whose sorted
    (distance, truth, detection) list is lexicographically smallest."""
    pairs = [(math.dist(d, (g.x, g.y)), j, i) for i, d in enumerate(dets) for j, g in enumerate(truths)
             if math.dist(d, (g.x, g.y)) <= radius]
    best = None
    for k in range(len(pairs) + 1):
        for combo in itertools.combinations(pairs, k):
            if len({c[1] for c in combo}) < k or len({c[2] for c in combo}) < k:
                continue
            ut, ud = {c[1] for c in combo}, {c[2] for c in combo}
            if any(p[1] not in ut and p[2] not in ud for p in pairs):
                continue  # not maximal
            key = sorted(combo)
            if best is None or key < best:
                best = key
    return {j: i for _, j, i in best or []}


def test_crossed_proximity():
    truths = [GroundTruth(0, 0.0, 0.0, 0, 90), GroundTruth(1, 2.0, 0.0, 0, 90)]
    dets = [(1.2, 0.0), (3.5, 0.0)]
    r = evaluate(dets, truths, 3.0)
    # (1.2 -> truth 1) at 0.8 is the globally closest pair and is taken first
    assert r.markers[1].detection_index == 0 and r.markers[1].error == pytest.approx(0.8)
    assert not r.markers[0].matched and r.false_positives == 1


@given(st.lists(st.tuples(st.floats(0, 6), st.floats(0, 6)), min_size=0, max_size=3),
       st.lists(st.tuples(st.floats(0, 6), st.floats(0, 6)), min_size=0, max_size=3))
def test_greedy_matches_exhaustive(dets, tr):
    truths = [GroundTruth(i, x, y, 0, 90) for i, (x, y) in enumerate(tr)]
    r = evaluate(dets, truths, 3.0)
    got = {j: m.detection_index for j, m in enumerate(r.markers) if m.matched}
    assert got == brute_assign(dets, truths, 3.0)
    assert r.false_positives == len(dets) - len(got) and r.false_negatives == len(truths) - len(got)


@given(st.permutations(range(4)))
def test_evaluate_symmetric_in_truth_order(perm):
    truths = [GroundTruth(i, 10.0 * i, 5.0 * i, 0, 90) for i in range(4)]
    dets = [(0.5, 0.2), (10.1, 5.3), (31.0, 15.0), (100.0, 100.0)]
    a = evaluate(dets, truths)
    b = evaluate(dets, [truths[i] for i in perm])
    by_id = lambda rep: {m.marker_id: (m.matched, m.error) for m in rep.markers}
    assert by_id(a) == by_id(b)
    assert (a.false_positives, a.mean_error) == (b.false_positives, b.mean_error)


# --- files ------------------------------------------------------------------------

def test_truth_csv_round_trip(tmp_path):
    truth = render_scene(random_scene(np.random.default_rng(2)))[1]
    p = tmp_path / "t.csv"
    write_truth_csv(truth, p)
    back = read_truth_csv(p)
    assert [(g.x, g.y, g.phi1, g.phi2) for g in back] == \
        pytest.approx([(round(g.x, 6), round(g.y, 6), round(g.phi1, 6), round(g.phi2, 6)) for g in truth])
    assert p.read_text() == truth_to_csv(truth)


def test_scene_text_round_trip():
    spec = random_scene(np.random.default_rng(9), clutter=Clutter(2, 1, 1))
    spec = SceneSpec(**{**spec.__dict__, "salt_pepper": 0.01, "warp": (1, 0.1, 0, 0, 1, 0, 0, 0, 1)})
    back = scene_from_text(scene_to_text(spec))
    assert scene_to_text(back) == scene_to_text(spec)
    assert np.array_equal(render_scene(back)[0].data, render_scene(spec)[0].data)


def test_shipped_example_scene():
    text = resources.files("diamark").joinpath("data/example_scene.cfg").read_text()
    spec = scene_from_text(text)
    img, truth = render_scene(spec)
    assert (img.width, img.height) == (320, 240) and len(truth) == 3


@pytest.mark.parametrize("text", ["scene.width = 10", "scene.width = 10\nscene.height = 10\nscene.depth = 2",
                                  "scene.width = 10\nscene.height = 10\nmarker.0.phi1 = 5",
                                  "scene.width = 10\nscene.height = 10\nmarker.0.center = 1"])
def test_bad_scene_text(text):
    with pytest.raises(ConfigError):
        scene_from_text(text)
