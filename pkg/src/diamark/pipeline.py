"""End-to-end detection: preprocess, screen, verify, locate, deduplicate."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .imgcore import as_array
from .preprocess import preprocess_stages
from .screening import screen
from .subpixel.locate import LocateRejected, SubpixelDetection, locate
from .subpixel.ncc import ExpandedFeatures
from .verify import verify_candidate

THREADS_ENV = "DIAMARK_THREADS"


@dataclass(frozen=True)
class Rejection:
    x: float
    y: float
    stage: str
    reason: str


@dataclass
class DetectionResult:
    detections: list[SubpixelDetection]
    rejections: list[Rejection]
    candidates: int
    timings_ms: dict[str, float] = field(default_factory=dict)

    def rejection_counts(self) -> dict[str, int]:
        out = {s: 0 for s in ("verify", "subpixel", "dedup")}
        for r in self.rejections:
            out[r.stage] += 1
        return out


def worker_count(cfg_threads: int = 0) -> int:
    """Thread count: ``DIAMARK_THREADS`` if set, else config; 0 means one per CPU."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    n = cfg_threads
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 0:
            raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _process(filtered, eq, feats, cand, cfg: PipelineConfig):
    # geometry is checked before gamma, which lifts dark wedge interiors
    hyp, why = verify_candidate(filtered, cand, cfg.verify)
    if hyp is None:
        return None, Rejection(cand.x, cand.y, "verify", why)
    try:
        return locate(eq, hyp, cfg.subpixel, feats), None
    except LocateRejected as exc:
        return None, Rejection(cand.x, cand.y, "subpixel", f"{exc.stage}: {exc.reason}")


def deduplicate(dets: list[SubpixelDetection], radius: float):
    """Keep the best-correlated detection within ``radius``; output sorted by (y, x)."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].peak_corr, dets[i].y, dets[i].x, i))
    kept, dropped = [], []
    for i in order:
        d = dets[i]
        if any(math.hypot(d.x - k.x, d.y - k.y) <= radius for k in kept):
            dropped.append(d)
        else:
            kept.append(d)
    kept.sort(key=lambda d: (d.y, d.x))
    return kept, dropped


def detect(img, cfg: PipelineConfig = PipelineConfig(), threads: int | None = None) -> DetectionResult:
    """Run the full pipeline on one image.

    Candidates are processed by a thread pool but results are gathered in
    candidate order, so output never depends on the worker count.
    """
    I = as_array(img)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    pre = preprocess_stages(I, cfg.preprocess)
    t1 = time.perf_counter()
    cands = screen(pre.structural, cfg.screening)
    t2 = time.perf_counter()
    timings["preprocess"] = 1e3 * (t1 - t0)
    timings["screening"] = 1e3 * (t2 - t1)

    r = cfg.subpixel.template_size // 2
    F, E = as_array(pre.filtered), as_array(pre.equalized)
    feats = ExpandedFeatures(E, r) if min(E.shape) >= 2 * r + 1 else None
    n = worker_count(cfg.run.threads) if threads is None else max(1, threads)

    dets: list[SubpixelDetection] = []
    rejections: list[Rejection] = []
    if feats is None:
        rejections = [Rejection(c.x, c.y, "verify", "border") for c in cands]
        results = []
    elif n == 1 or len(cands) < 2:
        results = [_process(F, E, feats, c, cfg) for c in cands]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(lambda c: _process(F, E, feats, c, cfg), cands))
    for det, rej in results:
        if det is not None:
            dets.append(det)
        else:
            rejections.append(rej)
    t3 = time.perf_counter()
    # verify and subpixel interleave per candidate, so they share one clock
    timings["verify+subpixel"] = 1e3 * (t3 - t2)

    kept, dropped = deduplicate(dets, cfg.run.dedup_radius)
    rejections += [Rejection(d.x, d.y, "dedup", "duplicate") for d in dropped]
    t4 = time.perf_counter()
    timings["dedup"] = 1e3 * (t4 - t3)
    timings["total"] = 1e3 * (t4 - t0)
    return DetectionResult(kept, rejections, len(cands), timings)


def check_accounting(res: DetectionResult) -> None:
    """Every candidate ends as a detection or exactly one rejection."""
    if res.candidates != len(res.detections) + len(res.rejections):
        raise AssertionError(f"{res.candidates} candidates but {len(res.detections)} detections "
                             f"+ {len(res.rejections)} rejections")
    if any(v < 0 for v in res.timings_ms.values()):
        raise AssertionError("negative stage timing")


def positions(res: DetectionResult) -> np.ndarray:
    return np.array([d.position for d in res.detections], dtype=np.float64).reshape(-1, 2)
