"""Adaptive marker templates and orientation disambiguation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..imgcore import as_array
from ..verify import bilinear

STYLES = ("quadrant", "thin-cross")
SAMPLE_OFFSET = 5.0


class TemplateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Template:
    pixels: np.ndarray
    theta: float
    phi1: float
    orient: int
    sigma_b: float
    style: str = "quadrant"

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    @property
    def radius(self) -> int:
        return self.size // 2


def _check_theta(theta: float) -> None:
    t = abs(theta) % 180.0
    if not 15.0 < t < 165.0:
        raise TemplateError(f"template angle {theta} too close to a degenerate cross")


def _render(size: int, phi1: float, phi2: float, line_width: float, style: str, ss: int) -> np.ndarray:
    c = size // 2
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    axis = (np.arange(size)[:, None] - c + offs[None, :]).ravel()
    u, v = np.meshgrid(axis, axis)
    c1, s1 = math.cos(math.radians(phi1)), math.sin(math.radians(phi1))
    c2, s2 = math.cos(math.radians(phi2)), math.sin(math.radians(phi2))
    d1 = c1 * v - s1 * u
    d2 = c2 * v - s2 * u
    if style == "quadrant":
        dark = d1 * d2 < 0
    else:
        half = 0.5 * line_width
        dark = (np.abs(d1) <= half) | (np.abs(d2) <= half)
    hi = np.where(dark, 0.0, 1.0)
    return hi.reshape(size, ss, size, ss).mean(axis=(1, 3))


def _normalize(t: np.ndarray) -> np.ndarray:
    lo, hi = float(t.min()), float(t.max())
    if hi - lo <= 0:
        raise TemplateError("template has no contrast")
    return (t - lo) / (hi - lo)


def generate_templates(theta: float, phi1: float, size: int = 21, sigma_b: float = 0.8,
                       line_width: float = 3.0, style: str = "quadrant",
                       supersample: int = 8) -> tuple[Template, Template]:
    """Render the two orientation variants of the marker template.

    Lines run at ``phi1`` and ``phi1 - theta`` through the centre pixel.
    Quadrant style: ``m=1`` darkens the wedge pair bisected by
    ``phi2 + theta/2`` and ``m=2`` the complementary pair. Thin-cross style:
    ``m=1`` draws dark lines on bright ground, ``m=2`` the reverse.
    Both are blurred by ``sigma_b`` (kernel truncated at 4 sigma) and
    stretched to [0, 1].
    """
    if size < 11 or size % 2 == 0:
        raise TemplateError("template size must be odd and >= 11")
    if style not in STYLES:
        raise TemplateError(f"unknown template style {style!r}")
    if sigma_b < 0:
        raise TemplateError("sigma_b must be >= 0")
    _check_theta(theta)
    phi2 = phi1 - theta
    base = _render(size, phi1, phi2, line_width, style, supersample)
    if sigma_b > 0:
        base = gaussian_filter(base, sigma_b, mode="nearest", truncate=4.0)
    t1 = _normalize(base)
    t2 = 1.0 - t1
    for t in (t1, t2):
        t.setflags(write=False)
    return (Template(t1, theta, phi1, 1, sigma_b, style),
            Template(t2, theta, phi1, 2, sigma_b, style))


def sample_points(theta: float, phi1: float) -> np.ndarray:
    """Offsets of the 3x3 sampling window, shifted 5 px along the wedge bisector."""
    beta = math.radians(phi1 - theta + theta / 2.0)
    ox, oy = SAMPLE_OFFSET * math.cos(beta), SAMPLE_OFFSET * math.sin(beta)
    g = np.array([-1.0, 0.0, 1.0])
    dx, dy = np.meshgrid(g, g)
    return np.stack([ox + dx.ravel(), oy + dy.ravel()], axis=1)


def sample_vector(arr: np.ndarray, center, theta: float, phi1: float) -> np.ndarray:
    pts = sample_points(theta, phi1)
    x = center[0] + pts[:, 0]
    y = center[1] + pts[:, 1]
    h, w = arr.shape
    if x.min() < 0 or y.min() < 0 or x.max() > w - 1 or y.max() > h - 1:
        raise TemplateError("disambiguation samples leave the image")
    return bilinear(arr, x, y)


def _stretch(v: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi - lo <= 0:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def disambiguate(img, center, t1: Template, t2: Template) -> tuple[int, float, float]:
    """Pick the template variant whose sample vector is L1-closest to the image.

    The image samples are stretched by the min/max of the template-sized
    window around ``center`` (templates by their own range), which makes the
    choice invariant to affine intensity changes. Returns (m, d1, d2); ties
    go to m=1.
    """
    I = as_array(img)
    cx, cy = int(center[0]), int(center[1])
    r = t1.radius
    h, w = I.shape
    if cx - r < 0 or cy - r < 0 or cx + r >= w or cy + r >= h:
        raise TemplateError("disambiguation window leaves the image")
    win = I[cy - r:cy + r + 1, cx - r:cx + r + 1]
    P = _stretch(sample_vector(I, (cx, cy), t1.theta, t1.phi1), float(win.min()), float(win.max()))
    dists = []
    for t in (t1, t2):
        T = sample_vector(t.pixels, (r, r), t.theta, t.phi1)
        T = _stretch(T, float(t.pixels.min()), float(t.pixels.max()))
        dists.append(float(np.abs(P - T).sum()))
    m = 1 if dists[0] <= dists[1] else 2
    return m, dists[0], dists[1]
