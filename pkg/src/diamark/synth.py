"""Synthetic diagonal-marker scenes with exact subpixel ground truth, and scoring.

Pixel centres sit at integer coordinates; pixel (x, y) covers
[x - 0.5, x + 0.5] x [y - 0.5, y + 0.5]. Markers are rasterized by
supersampling through the inverse scene homography, blurred, composited onto
a cluttered background, shifted by an additive illumination ramp and finally
degraded with seeded Gaussian noise.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .imgcore import GrayImage
from .kvtext import ConfigError, fmt, parse_kv, to_float, to_floats, to_int

STYLES = ("quadrant", "thin-cross")
TRUTH_HEADER = ["marker_id", "x", "y", "phi1", "phi2", "theta"]


def wrap180(a: float) -> float:
    """Fold a line angle into [0, 180)."""
    a = math.fmod(a, 180.0)
    return a + 180.0 if a < 0 else a


def line_gap(a: float, b: float) -> float:
    """Acute angle between two undirected lines, in degrees."""
    d = abs(wrap180(a) - wrap180(b))
    return min(d, 180.0 - d)


@dataclass(frozen=True)
class MarkerSpec:
    true_center: tuple[float, float]
    phi1: float = 30.0
    phi2: float = 120.0
    line_width: float = 3.0
    line_level: float = 0.15
    bg_level: float = 0.85
    blur_sigma: float = 1.0
    style: str = "quadrant"
    radius: float = 24.0

    def __post_init__(self):
        object.__setattr__(self, "true_center", tuple(float(v) for v in self.true_center))
        gap = abs(self.phi1 - self.phi2) % 180.0
        if not 15.0 < gap < 165.0:
            raise ValueError(f"line angles {self.phi1}, {self.phi2} too close to parallel")
        for lvl in (self.line_level, self.bg_level):
            if not 0.0 <= lvl <= 1.0:
                raise ValueError("marker levels must lie in [0, 1]")
        if abs(self.line_level - self.bg_level) < 0.1:
            raise ValueError("marker contrast must be at least 0.1")
        if self.style not in STYLES:
            raise ValueError(f"unknown marker style {self.style!r}")
        if self.blur_sigma < 0 or self.line_width <= 0 or self.radius <= 0:
            raise ValueError("blur_sigma >= 0, line_width > 0 and radius > 0 required")


@dataclass(frozen=True)
class Clutter:
    lines: int = 0
    blobs: int = 0
    checkerboards: int = 0

    @property
    def total(self) -> int:
        return self.lines + self.blobs + self.checkerboards


IDENTITY = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    markers: tuple[MarkerSpec, ...] = ()
    noise_sigma: float = 0.0
    illum_gradient: tuple[float, float] = (0.0, 0.0)
    clutter: Clutter = field(default_factory=Clutter)
    warp: tuple[float, ...] = IDENTITY
    seed: int = 0
    background: float = 0.5
    clutter_blur: float = 0.8
    supersample: int = 8
    salt_pepper: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "markers", tuple(self.markers))
        object.__setattr__(self, "warp", tuple(float(v) for v in self.warp))
        if self.width < 1 or self.height < 1:
            raise ValueError("scene dims must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if len(self.warp) != 9:
            raise ValueError("warp must hold 9 homography entries")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")

    @property
    def homography(self) -> np.ndarray:
        H = np.array(self.warp, dtype=np.float64).reshape(3, 3)
        return H / H[2, 2]


@dataclass(frozen=True)
class GroundTruth:
    marker_id: int
    x: float
    y: float
    phi1: float
    phi2: float

    @property
    def theta(self) -> float:
        return self.phi1 - self.phi2


class SceneError(ValueError):
    pass


# --- geometry helpers ----------------------------------------------------

def apply_homography(H: np.ndarray, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = H[2, 0] * x + H[2, 1] * y + H[2, 2]
    return (H[0, 0] * x + H[0, 1] * y + H[0, 2]) / w, (H[1, 0] * x + H[1, 1] * y + H[1, 2]) / w


def _warped_angle(H, cx, cy, phi):
    # direction of the image of a line through (cx, cy), via its far points
    r = 1.0
    dx, dy = math.cos(math.radians(phi)) * r, math.sin(math.radians(phi)) * r
    x0, y0 = apply_homography(H, cx - dx, cy - dy)
    x1, y1 = apply_homography(H, cx + dx, cy + dy)
    return wrap180(math.degrees(math.atan2(float(y1 - y0), float(x1 - x0))))


def marker_truth(spec: SceneSpec) -> list[GroundTruth]:
    H = spec.homography
    out = []
    for i, m in enumerate(spec.markers):
        cx, cy = m.true_center
        x, y = apply_homography(H, cx, cy)
        out.append(GroundTruth(i, float(x), float(y),
                               _warped_angle(H, cx, cy, m.phi1),
                               _warped_angle(H, cx, cy, m.phi2)))
    return out


def _subsample_grid(x0, y0, w, h, ss):
    """Subsample coordinates for the pixel block [x0, x0+w) x [y0, y0+h)."""
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    xs = (np.arange(x0, x0 + w)[:, None] + offs[None, :]).ravel()
    ys = (np.arange(y0, y0 + h)[:, None] + offs[None, :]).ravel()
    return np.meshgrid(xs, ys)


def _block_mean(a: np.ndarray, ss: int) -> np.ndarray:
    h, w = a.shape[0] // ss, a.shape[1] // ss
    return a.reshape(h, ss, w, ss).mean(axis=(1, 3))


def marker_pattern(m: MarkerSpec, u, v):
    """Marker intensity and coverage at marker-plane offsets (u, v) from its centre."""
    inside = u * u + v * v <= m.radius * m.radius
    c1, s1 = math.cos(math.radians(m.phi1)), math.sin(math.radians(m.phi1))
    c2, s2 = math.cos(math.radians(m.phi2)), math.sin(math.radians(m.phi2))
    d1 = c1 * v - s1 * u  # signed distance to line 1
    d2 = c2 * v - s2 * u
    if m.style == "quadrant":
        # the wedge pair bisected by phi2 + theta/2 has d1 * d2 < 0
        dark = d1 * d2 < 0
    else:
        half = 0.5 * m.line_width
        dark = (np.abs(d1) <= half) | (np.abs(d2) <= half)
    value = np.where(dark, m.line_level, m.bg_level)
    return value, inside


# --- rendering -----------------------------------------------------------

def _marker_bbox(spec: SceneSpec, m: MarkerSpec):
    H = spec.homography
    cx, cy = m.true_center
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    xs, ys = apply_homography(H, cx + m.radius * np.cos(ang), cy + m.radius * np.sin(ang))
    pad = int(math.ceil(4 * m.blur_sigma)) + 2
    return (int(math.floor(xs.min())) - pad, int(math.floor(ys.min())) - pad,
            int(math.ceil(xs.max())) + pad, int(math.ceil(ys.max())) + pad)


def check_scene(spec: SceneSpec) -> None:
    for i, m in enumerate(spec.markers):
        x0, y0, x1, y1 = _marker_bbox(spec, m)
        if x0 < 0 or y0 < 0 or x1 >= spec.width or y1 >= spec.height:
            raise SceneError(f"marker {i} does not fit inside the {spec.width}x{spec.height} image")


def _composite_marker(canvas: np.ndarray, spec: SceneSpec, m: MarkerSpec) -> None:
    ss = spec.supersample
    x0, y0, x1, y1 = _marker_bbox(spec, m)
    w, h = x1 - x0 + 1, y1 - y0 + 1
    X, Y = _subsample_grid(x0, y0, w, h, ss)
    Hinv = np.linalg.inv(spec.homography)
    u, v = apply_homography(Hinv, X, Y)
    u -= m.true_center[0]
    v -= m.true_center[1]
    value, inside = marker_pattern(m, u, v)
    alpha = _block_mean(inside.astype(np.float64), ss)
    premul = _block_mean(np.where(inside, value, 0.0), ss)
    if m.blur_sigma > 0:
        alpha = gaussian_filter(alpha, m.blur_sigma, mode="constant", truncate=4.0)
        premul = gaussian_filter(premul, m.blur_sigma, mode="constant", truncate=4.0)
    patch = canvas[y0:y1 + 1, x0:x1 + 1]
    canvas[y0:y1 + 1, x0:x1 + 1] = patch * (1.0 - alpha) + premul


def _segment_distance(X, Y, p0, p1):
    d = p1 - p0
    L2 = float(d @ d)
    t = np.clip(((X - p0[0]) * d[0] + (Y - p0[1]) * d[1]) / L2, 0.0, 1.0)
    return np.hypot(X - (p0[0] + t * d[0]), Y - (p0[1] + t * d[1]))


def _place(rng, spec: SceneSpec, radius: float, keep_out) -> tuple[float, float] | None:
    margin = radius + 2
    if spec.width <= 2 * margin or spec.height <= 2 * margin:
        return None
    for _ in range(200):
        x = rng.uniform(margin, spec.width - margin)
        y = rng.uniform(margin, spec.height - margin)
        if all(math.hypot(x - kx, y - ky) > radius + kr for kx, ky, kr in keep_out):
            return x, y
    return None


def _draw_clutter(canvas: np.ndarray, spec: SceneSpec, rng: np.random.Generator, keep_out) -> None:
    ss = spec.supersample
    bg = spec.background

    def level():
        while True:
            v = rng.uniform(0.05, 0.95)
            if abs(v - bg) >= 0.2:
                return v

    def stamp(cx, cy, r, fn):
        x0, y0 = max(int(cx - r) - 1, 0), max(int(cy - r) - 1, 0)
        x1 = min(int(cx + r) + 2, spec.width - 1)
        y1 = min(int(cy + r) + 2, spec.height - 1)
        X, Y = _subsample_grid(x0, y0, x1 - x0 + 1, y1 - y0 + 1, ss)
        val, cover = fn(X, Y)
        a = _block_mean(cover.astype(np.float64), ss)
        pv = _block_mean(np.where(cover, val, 0.0), ss)
        patch = canvas[y0:y1 + 1, x0:x1 + 1]
        canvas[y0:y1 + 1, x0:x1 + 1] = patch * (1 - a) + pv

    for _ in range(spec.clutter.lines):
        length = rng.uniform(15, 60)
        pos = _place(rng, spec, length / 2, keep_out)
        ang = rng.uniform(0, np.pi)
        width = rng.uniform(1.0, 3.0)
        lvl = level()
        if pos is None:
            continue
        cx, cy = pos
        d = np.array([math.cos(ang), math.sin(ang)]) * length / 2
        p0, p1 = np.array([cx, cy]) - d, np.array([cx, cy]) + d
        stamp(cx, cy, length / 2 + width,
              lambda X, Y: (lvl, _segment_distance(X, Y, p0, p1) <= width / 2))

    for _ in range(spec.clutter.blobs):
        sigma = rng.uniform(3, 10)
        amp = rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.35)
        pos = _place(rng, spec, 3 * sigma, keep_out)
        if pos is None:
            continue
        cx, cy = pos
        yy, xx = np.mgrid[0:spec.height, 0:spec.width]
        canvas += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma * sigma))

    for _ in range(spec.clutter.checkerboards):
        n = int(rng.integers(3, 6))
        sq = rng.uniform(5, 9)
        ang = rng.uniform(0, np.pi / 2)
        lo, hi = sorted((level(), level()))
        if hi - lo < 0.3:
            lo, hi = max(lo - 0.15, 0.02), min(hi + 0.15, 0.98)
        half = n * sq / 2
        pos = _place(rng, spec, half * math.sqrt(2), keep_out)
        if pos is None:
            continue
        cx, cy = pos
        ca, sa = math.cos(ang), math.sin(ang)

        def board(X, Y, cx=cx, cy=cy, ca=ca, sa=sa, sq=sq, half=half, lo=lo, hi=hi):
            u = ca * (X - cx) + sa * (Y - cy) + half
            v = -sa * (X - cx) + ca * (Y - cy) + half
            cover = (u >= 0) & (u < 2 * half) & (v >= 0) & (v < 2 * half)
            parity = (np.floor(u / sq) + np.floor(v / sq)) % 2
            return np.where(parity == 0, lo, hi), cover

        stamp(cx, cy, half * math.sqrt(2) + 1, board)


def render_scene(spec: SceneSpec) -> tuple[GrayImage, list[GroundTruth]]:
    """Render ``spec`` to an image plus per-marker ground truth (image frame)."""
    check_scene(spec)
    rng = np.random.default_rng(spec.seed)
    canvas = np.full((spec.height, spec.width), spec.background, dtype=np.float64)
    truth = marker_truth(spec)

    keep_out = []
    for m, g in zip(spec.markers, truth):
        x0, y0, x1, y1 = _marker_bbox(spec, m)
        keep_out.append((g.x, g.y, 0.5 * max(x1 - x0, y1 - y0) + 4))
    if spec.clutter.total:
        _draw_clutter(canvas, spec, rng, keep_out)
        if spec.clutter_blur > 0:
            canvas = gaussian_filter(canvas, spec.clutter_blur, mode="nearest")

    for m in spec.markers:
        _composite_marker(canvas, spec, m)

    gx, gy = spec.illum_gradient
    if gx or gy:
        yy, xx = np.mgrid[0:spec.height, 0:spec.width]
        canvas += gx * (xx - spec.width / 2) + gy * (yy - spec.height / 2)
    if spec.noise_sigma > 0:
        canvas += rng.normal(0.0, spec.noise_sigma, canvas.shape)
    if spec.salt_pepper > 0:
        hit = rng.random(canvas.shape) < spec.salt_pepper
        canvas[hit] = rng.integers(0, 2, int(hit.sum()))
    return GrayImage.clipped(canvas), truth


# --- random scene construction ------------------------------------------

def random_scene(rng: np.random.Generator, width: int = 256, height: int = 256, n_markers: int = 4,
                 blur_range=(0.5, 1.5), noise_sigma: float = 0.01, gradient: float = 5e-4,
                 clutter: Clutter = Clutter(), radius: float = 24.0, style: str = "quadrant",
                 seed: int | None = None, theta_range=(55.0, 125.0)) -> SceneSpec:
    """Draw a scene with non-overlapping random markers (rejection sampled)."""
    markers: list[MarkerSpec] = []
    margin = radius + 4 * blur_range[1] + 4
    tries = 0
    while len(markers) < n_markers:
        tries += 1
        if tries > 10000:
            raise SceneError("could not place markers without overlap")
        cx = rng.uniform(margin, width - margin)
        cy = rng.uniform(margin, height - margin)
        if any(math.hypot(cx - m.true_center[0], cy - m.true_center[1]) < 2 * margin for m in markers):
            continue
        phi1 = rng.uniform(0, 180)
        theta = rng.uniform(*theta_range)
        dark, bright = rng.uniform(0.08, 0.3), rng.uniform(0.7, 0.92)
        if rng.random() < 0.5 and style == "thin-cross":
            dark, bright = bright, dark
        markers.append(MarkerSpec(
            true_center=(cx, cy), phi1=phi1, phi2=wrap180(phi1 - theta),
            line_level=dark, bg_level=bright, blur_sigma=rng.uniform(*blur_range),
            style=style, radius=radius))
    g = rng.uniform(-gradient, gradient, 2) if gradient else (0.0, 0.0)
    return SceneSpec(width=width, height=height, markers=tuple(markers), noise_sigma=noise_sigma,
                     illum_gradient=(float(g[0]), float(g[1])), clutter=clutter,
                     seed=int(rng.integers(0, 2**31 - 1)) if seed is None else seed)


# --- evaluation ----------------------------------------------------------

@dataclass
class MarkerResult:
    marker_id: int
    matched: bool
    error: float | None = None
    theta_error: float | None = None
    detection_index: int | None = None


@dataclass
class EvalReport:
    markers: list[MarkerResult]
    false_positives: int
    false_negatives: int
    mean_error: float | None
    max_error: float | None
    frac_within_0_1: float

    def to_dict(self) -> dict:
        return {
            "markers": [
                {"marker_id": r.marker_id, "matched": r.matched,
                 "error_px": None if r.error is None else round(r.error, 6),
                 "theta_error_deg": None if r.theta_error is None else round(r.theta_error, 6)}
                for r in self.markers
            ],
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "mean_error_px": None if self.mean_error is None else round(self.mean_error, 6),
            "max_error_px": None if self.max_error is None else round(self.max_error, 6),
            "frac_within_0_1px": round(self.frac_within_0_1, 6),
        }

    def table(self) -> str:
        lines = ["marker  matched  error_px  theta_err_deg"]
        for r in self.markers:
            err = "-" if r.error is None else f"{r.error:.4f}"
            th = "-" if r.theta_error is None else f"{r.theta_error:.3f}"
            lines.append(f"{r.marker_id:>6}  {str(r.matched):>7}  {err:>8}  {th:>13}")
        mean = "-" if self.mean_error is None else f"{self.mean_error:.4f}"
        mx = "-" if self.max_error is None else f"{self.max_error:.4f}"
        lines.append(f"mean error {mean} px, max error {mx} px, "
                     f"within 0.1 px {100 * self.frac_within_0_1:.2f}%")
        lines.append(f"false positives {self.false_positives}, false negatives {self.false_negatives}")
        return "\n".join(lines) + "\n"


def _theta_error(det_theta, truth: GroundTruth):
    # swapping the two lines negates theta, so compare the acute crossing angles
    if det_theta is None:
        return None
    return abs(line_gap(det_theta, 0.0) - line_gap(truth.theta, 0.0))


def evaluate(detections: Sequence, truth: Sequence[GroundTruth], match_radius: float = 3.0) -> EvalReport:
    """Greedy nearest-pair matching of detections to ground truth.

    ``detections`` items need ``x`` and ``y`` attributes (``theta`` optional)
    or be ``(x, y)`` / ``(x, y, theta)`` tuples.
    """
    if match_radius <= 0:
        raise ValueError("match_radius must be > 0")
    pts = []
    for d in detections:
        if hasattr(d, "position"):
            pts.append((d.position[0], d.position[1], getattr(d, "theta", None)))
        elif hasattr(d, "x"):
            pts.append((d.x, d.y, getattr(d, "theta", None)))
        else:
            pts.append((d[0], d[1], d[2] if len(d) > 2 else None))

    pairs = []
    for i, (dx, dy, _) in enumerate(pts):
        for j, g in enumerate(truth):
            dist = math.hypot(dx - g.x, dy - g.y)
            if dist <= match_radius:
                pairs.append((dist, j, i))
    pairs.sort()
    used_d, used_t = set(), set()
    results = {j: MarkerResult(g.marker_id, False) for j, g in enumerate(truth)}
    for dist, j, i in pairs:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        results[j] = MarkerResult(truth[j].marker_id, True, dist, _theta_error(pts[i][2], truth[j]), i)

    errs = [r.error for r in results.values() if r.matched]
    fp = len(pts) - len(used_d)
    fn = len(truth) - len(used_t)
    return EvalReport(
        markers=[results[j] for j in range(len(truth))],
        false_positives=fp, false_negatives=fn,
        mean_error=float(np.mean(errs)) if errs else None,
        max_error=float(np.max(errs)) if errs else None,
        frac_within_0_1=(sum(e <= 0.1 for e in errs) / len(truth)) if truth else 0.0,
    )


# --- files ---------------------------------------------------------------

def truth_to_csv(truth: Iterable[GroundTruth]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRUTH_HEADER)
    for g in truth:
        w.writerow([g.marker_id] + [f"{v:.6f}" for v in (g.x, g.y, g.phi1, g.phi2, g.theta)])
    return buf.getvalue()


def write_truth_csv(truth: Iterable[GroundTruth], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(truth_to_csv(truth))


def read_truth_csv(path) -> list[GroundTruth]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0] != TRUTH_HEADER:
        raise ValueError(f"{path}: truth CSV header must be {','.join(TRUTH_HEADER)}")
    out = []
    for r in rows[1:]:
        if len(r) != len(TRUTH_HEADER):
            raise ValueError(f"{path}: malformed truth row {r}")
        out.append(GroundTruth(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4])))
    return out


_MARKER_KEYS = {
    "center": "true_center", "phi1": "phi1", "phi2": "phi2", "line_width": "line_width",
    "line_level": "line_level", "bg_level": "bg_level", "blur_sigma": "blur_sigma",
    "style": "style", "radius": "radius",
}


def scene_from_text(text: str, source: str = "<scene>") -> SceneSpec:
    """Parse a scene spec written in the ``section.key = value`` dialect."""
    kv = parse_kv(text, source)
    scene: dict = {}
    clutter: dict = {}
    markers: dict[int, dict] = {}
    for key, value in kv.items():
        parts = key.split(".")
        if parts[0] == "scene" and len(parts) == 2:
            name = parts[1]
            if name in ("width", "height", "seed", "supersample"):
                scene[name] = to_int(key, value)
            elif name in ("noise_sigma", "background", "clutter_blur", "salt_pepper"):
                scene[name] = to_float(key, value)
            elif name == "illum_gradient":
                g = to_floats(key, value)
                if len(g) != 2:
                    raise ConfigError(f"{key}: expected two values")
                scene[name] = g
            elif name == "warp":
                h = to_floats(key, value)
                if len(h) != 9:
                    raise ConfigError(f"{key}: expected nine values")
                scene[name] = h
            else:
                raise ConfigError(f"unknown key {key!r}")
        elif parts[0] == "clutter" and len(parts) == 2 and parts[1] in ("lines", "blobs", "checkerboards"):
            clutter[parts[1]] = to_int(key, value)
        elif parts[0] == "marker" and len(parts) == 3 and parts[2] in _MARKER_KEYS:
            idx = to_int(key, parts[1])
            field_name = _MARKER_KEYS[parts[2]]
            if field_name == "style":
                v = value
            elif field_name == "true_center":
                v = to_floats(key, value)
                if len(v) != 2:
                    raise ConfigError(f"{key}: expected x, y")
            else:
                v = to_float(key, value)
            markers.setdefault(idx, {})[field_name] = v
        else:
            raise ConfigError(f"unknown key {key!r}")
    for req in ("width", "height"):
        if req not in scene:
            raise ConfigError(f"scene.{req} is required")
    try:
        mlist = []
        for idx in sorted(markers):
            if "true_center" not in markers[idx]:
                raise ConfigError(f"marker.{idx}.center is required")
            mlist.append(MarkerSpec(**markers[idx]))
        return SceneSpec(markers=tuple(mlist), clutter=Clutter(**clutter), **scene)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_scene(path) -> SceneSpec:
    p = Path(path)
    return scene_from_text(p.read_text(encoding="utf-8"), str(p))


def scene_to_text(spec: SceneSpec) -> str:
    lines = [
        f"scene.width = {spec.width}",
        f"scene.height = {spec.height}",
        f"scene.seed = {spec.seed}",
        f"scene.noise_sigma = {fmt(float(spec.noise_sigma))}",
        f"scene.background = {fmt(float(spec.background))}",
        f"scene.illum_gradient = {fmt(tuple(float(g) for g in spec.illum_gradient))}",
        f"scene.warp = {fmt(spec.warp)}",
        f"scene.clutter_blur = {fmt(float(spec.clutter_blur))}",
        f"scene.supersample = {spec.supersample}",
        f"scene.salt_pepper = {fmt(float(spec.salt_pepper))}",
        f"clutter.lines = {spec.clutter.lines}",
        f"clutter.blobs = {spec.clutter.blobs}",
        f"clutter.checkerboards = {spec.clutter.checkerboards}",
    ]
    for i, m in enumerate(spec.markers):
        lines += [
            f"marker.{i}.center = {fmt(m.true_center)}",
            f"marker.{i}.phi1 = {fmt(float(m.phi1))}",
            f"marker.{i}.phi2 = {fmt(float(m.phi2))}",
            f"marker.{i}.line_width = {fmt(float(m.line_width))}",
            f"marker.{i}.line_level = {fmt(float(m.line_level))}",
            f"marker.{i}.bg_level = {fmt(float(m.bg_level))}",
            f"marker.{i}.blur_sigma = {fmt(float(m.blur_sigma))}",
            f"marker.{i}.style = {m.style}",
            f"marker.{i}.radius = {fmt(float(m.radius))}",
        ]
    return "\n".join(lines) + "\n"


def shifted(spec: SceneSpec, dx: float, dy: float) -> SceneSpec:
    """Copy of ``spec`` with every marker translated by (dx, dy)."""
    ms = tuple(replace(m, true_center=(m.true_center[0] + dx, m.true_center[1] + dy)) for m in spec.markers)
    return replace(spec, markers=ms)
