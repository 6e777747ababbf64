"""Composition of the subpixel stage for one verified hypothesis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..imgcore import as_array
from ..verify import LineSegment, MarkerHypothesis
from .blur import estimate_blur
from .fit import FitRejected, quadratic_subpixel
from .ncc import MODES, ExpandedFeatures, NCCError, fast_ncc
from .templates import STYLES, TemplateError, disambiguate, generate_templates


@dataclass(frozen=True)
class SubpixelParams:
    template_size: int = 21
    search_margin: int = 4
    fit_window: int = 5
    fit_sigma: float = 1.0
    min_corr: float = 0.6
    line_width: float = 3.0
    ncc_mode: str = "zncc"
    style: str = "quadrant"
    blur_reach: float = 15.0  # how far along each arm blur profiles are taken
    max_recenter: int = 2

    def __post_init__(self):
        if self.template_size < 11 or self.template_size % 2 == 0:
            raise ValueError("template_size must be odd and >= 11")
        if self.search_margin < 1:
            raise ValueError("search_margin must be >= 1")
        if self.fit_window < 3 or self.fit_window % 2 == 0:
            raise ValueError("fit_window must be odd and >= 3")
        if self.fit_window // 2 > self.search_margin:
            raise ValueError("fit_window must fit inside the search window")
        if not -1.0 <= self.min_corr <= 1.0:
            raise ValueError("min_corr must lie in [-1, 1]")
        if self.ncc_mode not in MODES:
            raise ValueError(f"ncc_mode must be one of {MODES}")
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}")
        if self.line_width <= 0 or self.fit_sigma <= 0 or self.blur_reach <= 5:
            raise ValueError("line_width > 0, fit_sigma > 0, blur_reach > 5 required")


@dataclass(frozen=True)
class SubpixelDetection:
    position: tuple[float, float]
    coarse: tuple[int, int]
    offset: tuple[float, float]
    peak_corr: float
    theta: float
    orient: int
    sigma_b: float = 0.0

    @property
    def x(self) -> float:
        return self.position[0]

    @property
    def y(self) -> float:
        return self.position[1]


class LocateRejected(Exception):
    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason


def arm_segments(hyp: MarkerHypothesis, reach: float, inner: float = 5.0) -> list[LineSegment]:
    """Segments along the four arms of the cross, clear of the centre."""
    cx, cy = hyp.intersection
    segs = []
    for phi in (hyp.phi1, hyp.phi2):
        ux, uy = math.cos(math.radians(phi)), math.sin(math.radians(phi))
        for sgn in (1.0, -1.0):
            p0 = (cx + sgn * inner * ux, cy + sgn * inner * uy)
            p1 = (cx + sgn * reach * ux, cy + sgn * reach * uy)
            segs.append(LineSegment(p0, p1, phi % 180.0, 0))
    return segs


def marker_blur(img, hyp: MarkerHypothesis, reach: float) -> tuple[float, bool]:
    ests = [estimate_blur(img, s) for s in arm_segments(hyp, reach)]
    good = [e.sigma for e in ests if not e.degenerate]
    if not good:
        return ests[0].sigma, True
    return float(np.median(good)), False


def locate(img, hyp: MarkerHypothesis, p: SubpixelParams = SubpixelParams(),
           features: ExpandedFeatures | None = None) -> SubpixelDetection:
    """Refine a verified hypothesis to a subpixel marker centre.

    Raises ``LocateRejected`` naming the failing stage.
    """
    if not hyp.verified:
        raise LocateRejected("input", "hypothesis not verified")
    I = as_array(img)
    h, w = I.shape
    r = p.template_size // 2
    if features is None or features.r != r or features.image.shape != I.shape:
        features = ExpandedFeatures(I, r)

    sigma_b, _ = marker_blur(I, hyp, p.blur_reach)
    try:
        t1, t2 = generate_templates(hyp.theta, hyp.phi1, p.template_size, sigma_b, p.line_width, p.style)
        m, _, _ = disambiguate(I, hyp.center, t1, t2)
    except TemplateError as exc:
        raise LocateRejected("template", str(exc)) from None
    tmpl = t1 if m == 1 else t2

    cx, cy = hyp.center
    hw = p.fit_window // 2
    for _ in range(p.max_recenter + 1):
        region = (cx - p.search_margin, cy - p.search_margin, cx + p.search_margin + 1, cy + p.search_margin + 1)
        try:
            surf = fast_ncc(features, tmpl, p.ncc_mode, "expand", region)
            px, py = surf.peak
        except NCCError as exc:
            raise LocateRejected("ncc", str(exc)) from None
        inner = (surf.origin[0] + hw <= px < surf.origin[0] + surf.width - hw and
                 surf.origin[1] + hw <= py < surf.origin[1] + surf.height - hw)
        if inner:
            break
        cx, cy = px, py
    else:
        raise LocateRejected("ncc", "correlation peak keeps drifting")

    peak_corr = surf.at(px, py)
    if peak_corr < p.min_corr:
        raise LocateRejected("correlation", f"peak {peak_corr:.3f} below {p.min_corr}")
    try:
        dx, dy, _ = quadratic_subpixel(surf, p.fit_window, p.fit_sigma)
    except FitRejected as exc:
        raise LocateRejected("fit", exc.reason) from None
    pos = (px + dx, py + dy)
    if not (-1 <= pos[0] <= w and -1 <= pos[1] <= h):
        raise LocateRejected("fit", "position outside image")
    return SubpixelDetection(pos, (px, py), (dx, dy), peak_corr, hyp.theta, m, sigma_b)
