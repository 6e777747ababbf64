"""Geometric verification of screened candidates.

Two checks: an annular scan for centre symmetry and a line-segment
intersection test. Angles are in degrees with x to the right and y down, so
a line at angle phi runs along (cos phi, sin phi) in pixel coordinates.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .imgcore import as_array

N_SAMPLES = 36
STEP_DEG = 10.0
MODELS = ("quadrant", "thin-cross")


class VerifyError(ValueError):
    """Verification geometry does not fit inside the image."""


@dataclass(frozen=True)
class VerifyParams:
    marker_halfwidth: float = 10.0
    model: str = "quadrant"
    phase_tol: float = 20.0
    noise_factor: float = 3.0
    rel_floor: float = 0.3
    min_amplitude: float = 1e-6
    nms_samples: int = 3
    line_merge_deg: float = 45.0
    angle_tol: float = 22.5
    min_support: int = 10
    min_length: float = 8.0
    grad_floor: float = 0.02
    grad_rel: float = 0.15
    extend: float = 5.0
    dist_thresh: float = 12.0
    min_angle_gap: float = 15.0
    roi_factor: float = 4.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.marker_halfwidth <= 0:
            raise ValueError("marker_halfwidth must be > 0")
        if not 0 < self.phase_tol < 90:
            raise ValueError("phase_tol must lie in (0, 90)")
        if not 0 < self.angle_tol < 90:
            raise ValueError("angle_tol must lie in (0, 90)")
        if self.min_support < 2 or self.min_length <= 0:
            raise ValueError("min_support >= 2 and min_length > 0 required")
        if self.extend < 0 or self.dist_thresh <= 0:
            raise ValueError("extend >= 0 and dist_thresh > 0 required")
        if not 0 < self.min_angle_gap < 90:
            raise ValueError("min_angle_gap must lie in (0, 90)")
        if self.roi_factor < 2:
            raise ValueError("roi_factor must be >= 2")

    @property
    def radius(self) -> float:
        return min(max(1.5 * self.marker_halfwidth, 5.0), 30.0)


@dataclass(frozen=True, eq=False)
class AnnularProfile:
    angles: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    crossings: tuple[tuple[float, int], ...]  # (angle deg, polarity)


@dataclass(frozen=True)
class LineSegment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    angle: float
    support: int

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])


@dataclass(frozen=True)
class MarkerHypothesis:
    center: tuple[int, int]
    phi1: float
    phi2: float
    intersection: tuple[float, float]
    symmetry_ok: bool = False
    intersection_ok: bool = False

    @property
    def theta(self) -> float:
        return self.phi1 - self.phi2

    @property
    def verified(self) -> bool:
        return self.symmetry_ok and self.intersection_ok


# --- annular scan --------------------------------------------------------

def _ring_offsets(radius: float) -> np.ndarray:
    # first quadrant from trig, the rest by exact quarter-turn rotations
    a = np.radians(np.arange(9) * STEP_DEG)
    q = np.stack([radius * np.cos(a), radius * np.sin(a)], axis=1)
    quads = [q]
    for _ in range(3):
        q = np.stack([-q[:, 1], q[:, 0]], axis=1)
        quads.append(q)
    return np.concatenate(quads)


def bilinear(I: np.ndarray, x, y) -> np.ndarray:
    """Bilinear samples of ``I`` at real (x, y); points must be in range."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h, w = I.shape
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 2 if w > 1 else 0)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 2 if h > 1 else 0)
    fx, fy = x - x0, y - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    top = I[y0, x0] * (1 - fx) + I[y0, x1] * fx
    bot = I[y1, x0] * (1 - fx) + I[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def profile_events(d: np.ndarray, diff: np.ndarray, p: VerifyParams = VerifyParams()) -> tuple[tuple[float, int], ...]:
    """Significant extrema of the filtered derivative, i.e. zero crossings of its slope.

    The noise level is the median absolute raw first difference (edges occupy
    only a few samples, so it tracks the noise), carried through the DoG by
    the filter's white-noise gain.
    """
    mag = np.abs(d)
    peak = float(mag.max()) if mag.size else 0.0
    noise = float(np.median(np.abs(diff))) * _DOG_GAIN
    floor = max(p.noise_factor * noise, p.rel_floor * peak, p.min_amplitude)
    n = len(d)
    events = []
    for k in range(n):
        a, b, c = d[k - 1], d[k], d[(k + 1) % n]
        if abs(b) <= floor:
            continue
        if b > 0 and not (b >= a and b > c):
            continue
        if b < 0 and not (b <= a and b < c):
            continue
        # DoG sidelobes of a strong edge sit 2-3 samples away
        nbr = mag[[(k + j) % n for j in range(-p.nms_samples, p.nms_samples + 1) if j]]
        if np.any(nbr > abs(b)):
            continue
        curv = a - 2 * b + c
        off = 0.5 * (a - c) / curv if curv != 0 else 0.0
        ang = (k + off) * STEP_DEG % 360.0
        events.append((float(ang), 1 if b > 0 else -1))
    return tuple(sorted(events))


def _dog(x: np.ndarray) -> np.ndarray:
    return gaussian_filter1d(x, 1.0, mode="wrap") - gaussian_filter1d(x, 2.0, mode="wrap")


_impulse = np.zeros(N_SAMPLES)
_impulse[0] = 1.0
_DOG_GAIN = float(np.sqrt(np.sum(_dog(_impulse) ** 2)))
del _impulse


def annular_scan(img, center, radius: float, p: VerifyParams = VerifyParams()) -> AnnularProfile:
    """Sample a circle around ``center`` and locate its intensity transitions."""
    I = as_array(img)
    h, w = I.shape
    cx, cy = float(center[0]), float(center[1])
    if cx - radius < 0 or cy - radius < 0 or cx + radius > w - 1 or cy + radius > h - 1:
        raise VerifyError(f"scan circle r={radius} at ({cx}, {cy}) leaves the image")
    off = _ring_offsets(radius)
    values = bilinear(I, cx + off[:, 0], cy + off[:, 1])
    diff = 0.5 * (np.roll(values, -1) - np.roll(values, 1))
    deriv = _dog(diff)
    angles = np.arange(N_SAMPLES) * STEP_DEG
    return AnnularProfile(angles, values, deriv, profile_events(deriv, diff, p))


def _ang_dist(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _merge_lines(events, max_gap: float, dark_lines: bool):
    """Fold entry/exit transitions of thin lines into single line events."""
    n = len(events)
    if n % 2:
        return None
    want = (-1, 1) if dark_lines else (1, -1)
    for start in (0, 1):
        merged = []
        ok = True
        for i in range(start, start + n, 2):
            (a0, p0), (a1, p1) = events[i % n], events[(i + 1) % n]
            gap = (a1 - a0) % 360.0
            if (p0, p1) != want or gap > max_gap:
                ok = False
                break
            merged.append(((a0 + gap / 2) % 360.0, p0))
        if ok:
            return sorted(merged)
    return None


def check_symmetry(profile: AnnularProfile | Sequence[tuple[float, int]],
                   p: VerifyParams = VerifyParams()) -> bool:
    """True when the transitions form two centrally symmetric pairs.

    ``quadrant``: four transitions of alternating polarity; opposite ones sit
    180 deg apart and share the same angular-derivative sign, which is the
    point-mirror of an edge (its 2-D gradient reverses).
    ``thin-cross``: each dark line contributes an entry/exit pair that is first
    merged into one line event; four line events must pair up at 180 deg.
    """
    events = list(profile.crossings if isinstance(profile, AnnularProfile) else profile)
    if p.model == "thin-cross":
        merged = _merge_lines(events, p.line_merge_deg, True)
        if merged is None:
            merged = _merge_lines(events, p.line_merge_deg, False)
        if merged is None:
            return False
        events = merged
        if len(events) != 4:
            return False
    else:
        if len(events) != 4:
            return False
        pols = [e[1] for e in events]
        if any(pols[i] == pols[(i + 1) % 4] for i in range(4)):
            return False
    for i in (0, 1):
        (a0, p0), (a1, p1) = events[i], events[i + 2]
        if abs(_ang_dist(a0, a1) - 180.0) > p.phase_tol:
            return False
        if p.model == "quadrant" and p0 != p1:
            return False
    return True


# --- line segments -------------------------------------------------------

_NEIGHBOURS = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


def detect_segments(img, roi, p: VerifyParams = VerifyParams()) -> list[LineSegment]:
    """Gradient-orientation region growing inside ``roi = (x0, y0, x1, y1)``.

    Orientation is taken modulo 180 deg so both flanks of a thin line join
    the same region. Coordinates of returned segments are image pixels.
    """
    I = as_array(img)
    H, W = I.shape
    x0, y0, x1, y1 = (int(v) for v in roi)
    if x0 < 0 or y0 < 0 or x1 > W or y1 > H or x1 - x0 < 3 or y1 - y0 < 3:
        raise VerifyError(f"roi {roi} not inside a {W}x{H} image")
    # one pixel of context on each side where available
    ex0, ey0, ex1, ey1 = max(x0 - 1, 0), max(y0 - 1, 0), min(x1 + 1, W), min(y1 + 1, H)
    patch = I[ey0:ey1, ex0:ex1]
    gy, gx = np.gradient(patch)
    sl = (slice(y0 - ey0, y0 - ey0 + (y1 - y0)), slice(x0 - ex0, x0 - ex0 + (x1 - x0)))
    gx, gy = gx[sl], gy[sl]
    mag = np.hypot(gx, gy)
    if mag.max() <= 0:
        return []
    thr = max(p.grad_floor, p.grad_rel * float(mag.max()))
    active = mag > thr
    if active.sum() < p.min_support:
        return []
    # doubled-angle unit vectors make orientation mod 180 averageable
    ang2 = 2.0 * np.arctan2(gy, gx)
    u2, v2 = np.cos(ang2), np.sin(ang2)
    cos_tol2 = math.cos(math.radians(2 * p.angle_tol))

    h, w = mag.shape
    used = ~active
    flat = mag.ravel()
    order = np.argsort(-flat, kind="stable")
    segments = []
    for s in order:
        sy, sx = divmod(int(s), w)
        if used[sy, sx]:
            continue
        used[sy, sx] = True
        region = [(sx, sy)]
        su, sv = u2[sy, sx] * mag[sy, sx], v2[sy, sx] * mag[sy, sx]
        queue = deque(region)
        while queue:
            qx, qy = queue.popleft()
            norm = math.hypot(su, sv)
            mu, mv = su / norm, sv / norm
            for dx, dy in _NEIGHBOURS:
                nx, ny = qx + dx, qy + dy
                if 0 <= nx < w and 0 <= ny < h and not used[ny, nx]:
                    if u2[ny, nx] * mu + v2[ny, nx] * mv >= cos_tol2:
                        used[ny, nx] = True
                        region.append((nx, ny))
                        queue.append((nx, ny))
                        m = mag[ny, nx]
                        su += u2[ny, nx] * m
                        sv += v2[ny, nx] * m
        if len(region) < p.min_support:
            continue
        seg = _fit_segment(np.array(region, dtype=np.float64), mag, x0, y0)
        if seg is not None and seg.length >= p.min_length:
            segments.append(seg)
    return segments


def _fit_segment(pts: np.ndarray, mag: np.ndarray, ox: int, oy: int) -> LineSegment | None:
    wts = mag[pts[:, 1].astype(int), pts[:, 0].astype(int)]
    cx, cy = np.average(pts[:, 0], weights=wts), np.average(pts[:, 1], weights=wts)
    dx, dy = pts[:, 0] - cx, pts[:, 1] - cy
    sxx, syy, sxy = (wts * dx * dx).sum(), (wts * dy * dy).sum(), (wts * dx * dy).sum()
    phi = 0.5 * math.atan2(2 * sxy, sxx - syy)  # major axis
    ux, uy = math.cos(phi), math.sin(phi)
    t = dx * ux + dy * uy
    if t.max() - t.min() <= 0:
        return None
    p0 = (float(ox + cx + t.min() * ux), float(oy + cy + t.min() * uy))
    p1 = (float(ox + cx + t.max() * ux), float(oy + cy + t.max() * uy))
    angle = _wrap180(math.degrees(phi))
    return LineSegment(p0, p1, angle, len(pts))


def _wrap180(a: float) -> float:
    a = a % 180.0
    return 0.0 if a >= 180.0 else a  # tiny negatives round up to 180.0


def _acute(a: float, b: float) -> float:
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def line_intersection(s: LineSegment, t: LineSegment, extend: float):
    """Intersection of two segments' carrier lines if it lies on both extended spans."""
    (ax, ay), (bx, by) = s.p0, s.p1
    (cx, cy), (dx, dy) = t.p0, t.p1
    rx, ry = bx - ax, by - ay
    qx, qy = dx - cx, dy - cy
    den = rx * qy - ry * qx
    if abs(den) < 1e-12:
        return None
    u = ((cx - ax) * qy - (cy - ay) * qx) / den
    v = ((cx - ax) * ry - (cy - ay) * rx) / den
    ls, lt = math.hypot(rx, ry), math.hypot(qx, qy)
    es, et = extend / ls, extend / lt
    if not (-es <= u <= 1 + es and -et <= v <= 1 + et):
        return None
    return (ax + u * rx, ay + u * ry)


def merge_collinear(segments: Sequence[LineSegment], angle_tol: float = 3.0,
                    offset_tol: float = 1.5) -> list[LineSegment]:
    """Join pieces of one straight line (e.g. the two arms of a cross)."""
    order = sorted(range(len(segments)), key=lambda i: (-segments[i].support, i))
    groups: list[list[LineSegment]] = []
    for i in order:
        s = segments[i]
        mx, my = 0.5 * (s.p0[0] + s.p1[0]), 0.5 * (s.p0[1] + s.p1[1])
        for g in groups:
            a = g[0]
            if _acute(a.angle, s.angle) > angle_tol:
                continue
            ux, uy = math.cos(math.radians(a.angle)), math.sin(math.radians(a.angle))
            off = abs(-(mx - a.p0[0]) * uy + (my - a.p0[1]) * ux)
            if off <= offset_tol:
                g.append(s)
                break
        else:
            groups.append([s])
    out = []
    for g in groups:
        if len(g) == 1:
            out.append(g[0])
            continue
        wts = np.array([m.support for m in g], dtype=np.float64)
        a2 = np.radians(2 * np.array([m.angle for m in g]))
        ang = 0.5 * math.atan2(float((wts * np.sin(a2)).sum()), float((wts * np.cos(a2)).sum()))
        ux, uy = math.cos(ang), math.sin(ang)
        mids = np.array([[0.5 * (m.p0[0] + m.p1[0]), 0.5 * (m.p0[1] + m.p1[1])] for m in g])
        cx, cy = np.average(mids[:, 0], weights=wts), np.average(mids[:, 1], weights=wts)
        ends = np.array([pt for m in g for pt in (m.p0, m.p1)])
        t = (ends[:, 0] - cx) * ux + (ends[:, 1] - cy) * uy
        out.append(LineSegment((float(cx + t.min() * ux), float(cy + t.min() * uy)),
                               (float(cx + t.max() * ux), float(cy + t.max() * uy)),
                               _wrap180(math.degrees(ang)), int(wts.sum())))
    return out


def intersect_verify(segments: Sequence[LineSegment], cand, p: VerifyParams = VerifyParams()):
    """Pick the strongest extended segment pair crossing near the candidate.

    Collinear pieces are merged first. Among non-parallel pairs whose
    extended spans cross within ``dist_thresh`` of the candidate, the pair
    whose weaker member has the most support wins (then the nearest
    crossing). Returns a ``MarkerHypothesis`` with ``intersection_ok`` set,
    or ``None``.
    """
    cx, cy = (cand.x, cand.y) if hasattr(cand, "x") else (float(cand[0]), float(cand[1]))
    segs = merge_collinear(segments)
    best = None
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            s, t = segs[i], segs[j]
            if _acute(s.angle, t.angle) <= p.min_angle_gap:
                continue
            pt = line_intersection(s, t, p.extend)
            if pt is None:
                continue
            d = math.hypot(pt[0] - cx, pt[1] - cy)
            if d > p.dist_thresh:
                continue
            key = (-min(s.support, t.support), -(s.support + t.support), d, i, j)
            if best is None or key < best[0]:
                best = (key, s, t, pt)
    if best is None:
        return None
    _, s, t, pt = best
    if (t.support, t.length) > (s.support, s.length):
        s, t = t, s
    return MarkerHypothesis(center=(int(round(cx)), int(round(cy))), phi1=s.angle, phi2=t.angle,
                            intersection=(float(pt[0]), float(pt[1])), intersection_ok=True)


def roi_around(center, radius: float, factor: float, shape) -> tuple[int, int, int, int]:
    half = int(math.ceil(factor * radius / 2))
    cx, cy = int(round(center[0])), int(round(center[1]))
    H, W = shape
    return (max(cx - half, 0), max(cy - half, 0), min(cx + half + 1, W), min(cy + half + 1, H))


def verify_candidate(img, cand, p: VerifyParams = VerifyParams()):
    """Run both geometric checks; returns (hypothesis or None, reason)."""
    I = as_array(img)
    r = p.radius
    cx, cy = (cand.x, cand.y) if hasattr(cand, "x") else cand
    roi = roi_around((cx, cy), r, p.roi_factor, I.shape)
    if roi[2] - roi[0] < 2 * r or roi[3] - roi[1] < 2 * r:
        return None, "border"
    segs = detect_segments(I, roi, p)
    hyp = intersect_verify(segs, (cx, cy), p)
    if hyp is None:
        return None, "intersection"
    # scan around the crossing, which is the better centre estimate
    ix, iy = hyp.intersection
    center = (int(math.floor(ix + 0.5)), int(math.floor(iy + 0.5)))
    try:
        prof = annular_scan(I, center, r, p)
    except VerifyError:
        return None, "border"
    if not check_symmetry(prof, p):
        return None, "symmetry"
    return MarkerHypothesis(center=center, phi1=hyp.phi1, phi2=hyp.phi2,
                            intersection=hyp.intersection, symmetry_ok=True, intersection_ok=True), "ok"
