import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diamark.subpixel.ncc import ExpandedFeatures, NCCError, expand_features, fast_ncc, naive_ncc


def loop_ncc(img, t, zero_mean=True):
    """Plain triple loop, edge-clamped reads, no numpy vector ops on windows."""
    h, w = img.shape
    k = t.shape[0]
    r = k // 2
    tv = [float(v) for v in t.ravel()]
    if zero_mean:
        m = sum(tv) / len(tv)
        tv = [v - m for v in tv]
    tn = sum(v * v for v in tv) ** 0.5
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            win = [float(img[min(max(y + dy, 0), h - 1), min(max(x + dx, 0), w - 1)])
                   for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
            if zero_mean:
                m = sum(win) / len(win)
                win = [v - m for v in win]
            wn = sum(v * v for v in win) ** 0.5
            if wn > 1e-10 * k:
                out[y, x] = sum(a * b for a, b in zip(win, tv)) / (wn * tn)
    return out


def test_radius_zero_expansion_is_identity():
    img = np.random.default_rng(0).random((7, 9))
    assert np.array_equal(expand_features(img, 0).tensor()[..., 0], img)


def test_ramp_expansion_channels():
    img = np.arange(8 * 10, dtype=float).reshape(8, 10) / 100
    T = ExpandedFeatures(img, 1).tensor()
    y, x = 4, 5
    want = [img[y + dy, x + dx] for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    assert T[y, x].tolist() == want
    assert T.shape == (8, 10, 9)


def test_constant_channels():
    T = ExpandedFeatures(np.full((12, 12), 0.3), 2).tensor()
    assert np.all(T == 0.3)


def test_self_match_and_anti_match():
    rng = np.random.default_rng(1)
    img = rng.random((40, 40))
    t = img[10:21, 15:26].copy()
    f = ExpandedFeatures(img, 5)
    for method in ("expand", "spectral"):
        s = fast_ncc(f, t, method=method)
        assert s.at(20, 15) == pytest.approx(1.0, abs=1e-6)
        assert s.peak == (20, 15)
        neg = fast_ncc(ExpandedFeatures(1 - img, 5), t, method=method)
        assert neg.at(20, 15) == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("method", ["expand", "spectral", "auto"])
def test_matches_naive_64(method):
    rng = np.random.default_rng(2)
    img, t = rng.random((64, 64)), rng.random((11, 11))
    s = fast_ncc(ExpandedFeatures(img, 5), t, method=method)
    assert np.max(np.abs(s.values - naive_ncc(img, t))) <= 1e-5


@pytest.mark.parametrize("mode", ["zncc", "cosine"])
def test_naive_matches_loop_oracle(mode):
    rng = np.random.default_rng(3)
    img, t = rng.random((13, 11)), rng.random((5, 5))
    img[:4, :4] = 0.25  # a flat patch
    want = loop_ncc(img, t, mode == "zncc")
    assert np.max(np.abs(naive_ncc(img, t, mode) - want)) <= 1e-12
    for method in ("expand", "spectral"):
        got = fast_ncc(ExpandedFeatures(img, 2), t, mode, method).values
        assert np.max(np.abs(got - want)) <= 1e-9


@given(st.integers(0, 2**31), st.integers(8, 40), st.integers(8, 40), st.sampled_from([1, 2, 3, 4]),
       st.sampled_from(["zncc", "cosine"]))
def test_fast_equals_naive_property(seed, h, w, r, mode):
    rng = np.random.default_rng(seed)
    img = rng.random((h, w))
    if seed % 3 == 0:
        img = np.round(img * 4) / 4  # many exact ties and flat windows
    t = rng.random((2 * r + 1, 2 * r + 1))
    if h < 2 * r + 1 or w < 2 * r + 1:
        return
    ref = naive_ncc(img, t, mode)
    f = ExpandedFeatures(img, r)
    for method in ("expand", "spectral"):
        v = fast_ncc(f, t, mode, method).values
        assert np.max(np.abs(v - ref)) <= 1e-9
        assert np.all(np.abs(v) <= 1 + 1e-9)


def test_region_is_a_window_of_the_full_surface():
    rng = np.random.default_rng(4)
    img, t = rng.random((50, 60)), rng.random((7, 7))
    f = ExpandedFeatures(img, 3)
    full = fast_ncc(f, t).values
    s = fast_ncc(f, t, region=(10, 5, 25, 17))
    assert s.origin == (10, 5) and s.values.shape == (12, 15)
    assert np.allclose(s.values, full[5:17, 10:25], atol=1e-12)
    edge = fast_ncc(f, t, region=(0, 0, 5, 5))
    assert not edge.valid[2, 2] and edge.valid[3, 3]


def test_constant_window_gives_zero():
    img = np.full((20, 20), 0.7)
    s = fast_ncc(ExpandedFeatures(img, 2), np.random.default_rng(5).random((5, 5)))
    assert np.all(s.values == 0)


def test_errors():
    f = ExpandedFeatures(np.random.default_rng(6).random((20, 20)), 2)
    with pytest.raises(NCCError):
        fast_ncc(f, np.ones((5, 5)))
    with pytest.raises(NCCError):
        fast_ncc(f, np.random.default_rng(7).random((7, 7)))
    with pytest.raises(NCCError):
        fast_ncc(f, np.random.default_rng(7).random((5, 5)), mode="sad")
    with pytest.raises(NCCError):
        ExpandedFeatures(np.zeros((4, 4)), 3)
