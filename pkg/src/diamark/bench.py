"""Timing harness: fast vs naive NCC over a size grid, and end-to-end runtime spread."""

from __future__ import annotations

import statistics
import time

import numpy as np

from .config import BenchParams, PipelineConfig
from .pipeline import detect
from .subpixel.ncc import ExpandedFeatures, fast_ncc, naive_ncc
from .synth import render_scene, random_scene


def coefficient_of_variation(xs) -> float:
    """Sample standard deviation over mean."""
    xs = [float(x) for x in xs]
    if len(xs) < 2:
        return 0.0
    return statistics.stdev(xs) / statistics.fmean(xs)


def _time(fn, reps: int) -> list[float]:
    out = []
    for _ in range(reps):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return out


def _summary(raw: list[float]) -> dict:
    return {"median_s": statistics.median(raw), "cv": coefficient_of_variation(raw), "raw_s": raw}


def ncc_cell(img: np.ndarray, tmpl: np.ndarray, reps: int, mode: str = "zncc",
             fast_reps: int | None = None) -> dict:
    """Time one (image, template) cell; the fast path includes building its features.

    ``fast_reps`` (default ``reps``) lets the cheap path take more samples,
    since its median is the noisier side of the speedup ratio.
    """
    r = tmpl.shape[0] // 2
    fast = _time(lambda: fast_ncc(ExpandedFeatures(img, r), tmpl, mode), fast_reps or reps)
    naive = _time(lambda: naive_ncc(img, tmpl, mode), reps)
    f, n = _summary(fast), _summary(naive)
    return {"image": img.shape[0], "template": tmpl.shape[0], "fast": f, "naive": n,
            "speedup": n["median_s"] / f["median_s"]}


def ncc_grid(bp: BenchParams, progress=None) -> list[dict]:
    rng = np.random.default_rng(bp.seed)
    cells = []
    for n in bp.image_sizes:
        img = rng.random((n, n))
        for k in bp.template_sizes:
            tmpl = rng.random((k, k))
            cells.append(ncc_cell(img, tmpl, bp.repetitions))
            if progress:
                progress(cells[-1])
    return cells


def monotone_speedup(cells: list[dict], image: int) -> bool | None:
    row = sorted((c["template"], c["speedup"]) for c in cells if c["image"] == image)
    if len(row) < 2:
        return None
    return all(b[1] >= a[1] for a, b in zip(row, row[1:]))


def scene_set(bp: BenchParams) -> list:
    rng = np.random.default_rng(bp.seed + 1)
    return [render_scene(random_scene(rng, bp.scene_size, bp.scene_size, bp.scene_markers))[0]
            for _ in range(bp.scenes)]


def scene_timings(cfg: PipelineConfig, images) -> dict:
    """Sequential end-to-end detection times; one untimed warm-up run first."""
    detect(images[0], cfg, threads=1)
    raw = []
    for img in images:
        t = time.perf_counter()
        detect(img, cfg, threads=1)
        raw.append(time.perf_counter() - t)
    return {"scenes": len(raw), "size": int(np.asarray(images[0]).shape[0]), "median_s": statistics.median(raw),
            "mean_s": statistics.fmean(raw), "cv": coefficient_of_variation(raw), "raw_s": raw}


def run_bench(cfg: PipelineConfig = PipelineConfig(), progress=None) -> dict:
    bp = cfg.bench
    cells = ncc_grid(bp, progress)
    largest = max(bp.image_sizes)
    return {
        "params": {"seed": bp.seed, "repetitions": bp.repetitions, "image_sizes": list(bp.image_sizes),
                   "template_sizes": list(bp.template_sizes)},
        "ncc": cells,
        "speedup_monotone": {str(n): monotone_speedup(cells, n) for n in bp.image_sizes},
        "largest_image": largest,
        "end_to_end": scene_timings(cfg, scene_set(bp)),
    }
