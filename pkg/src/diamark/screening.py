"""Candidate generation and sparsification on the structural map.

Contours of the thresholded map are scored with a displacement-vector
curvature, screened by a significance/separation/structural-percentile rule,
then condensed with a curvature-weighted density field, a density-weighted
mean shift, and greedy grid-entropy pruning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import cv2
import numpy as np

from .preprocess import StructuralMap


@dataclass(frozen=True, eq=False)
class Contour:
    points: np.ndarray  # (N, 2) integer (x, y), 8-connected, in tracing order
    closed: bool = True

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class CandidatePoint:
    x: float
    y: float
    curvature: float
    structural: float
    density: float = 0.0
    alive: bool = True

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class ScreeningParams:
    contour_threshold: float = 0.5
    curvature_radius: int = 3
    epsilon: float = 1e-6
    min_peak_separation: int = 5
    structural_keep_fraction: float = 0.70
    peak_sigma_factor: float = 3.0
    threshold_scope: str = "contour"  # or "global"
    threshold_stat: str = "robust"  # or "mean_std"
    density_sigma: float = 4.0
    shift_h: float = 8.0
    shift_iters: int = 5
    merge_radius: float = 1.0
    area_upper_mads: float | None = None
    grid_cell: int = 32
    entropy_target: float | None = None
    entropy_target_ratio: float = 0.9

    def __post_init__(self):
        if not 0 < self.contour_threshold < 1:
            raise ValueError("contour_threshold must lie in (0, 1)")
        if self.curvature_radius < 1 or self.epsilon <= 0:
            raise ValueError("curvature_radius >= 1 and epsilon > 0 required")
        if not 0 < self.structural_keep_fraction <= 1:
            raise ValueError("structural_keep_fraction must lie in (0, 1]")
        if self.density_sigma <= 0 or self.shift_h <= 0 or self.shift_iters < 0:
            raise ValueError("density_sigma > 0, shift_h > 0, shift_iters >= 0 required")
        if self.grid_cell < 1 or self.min_peak_separation < 0:
            raise ValueError("grid_cell >= 1 and min_peak_separation >= 0 required")
        if self.threshold_scope not in ("contour", "global"):
            raise ValueError("threshold_scope must be 'contour' or 'global'")
        if self.threshold_stat not in ("mean_std", "robust"):
            raise ValueError("threshold_stat must be 'mean_std' or 'robust'")
        if self.area_upper_mads is not None and self.area_upper_mads <= 0:
            raise ValueError("area_upper_mads must be > 0")
        if self.entropy_target is not None and self.entropy_target < 0:
            raise ValueError("entropy_target must be >= 0")


# --- contours ------------------------------------------------------------

def _area_keep(areas: np.ndarray, upper_mads: float | None = None) -> np.ndarray:
    """Noise-aware region filter on connected-component areas.

    Regions under 4 px are dropped outright and excluded from the median/MAD
    statistics (single-pixel specks would otherwise drag the median to ~1).
    The lower fence is ``median - 3 MAD``; the upper fence
    ``median + upper_mads * MAD`` applies only when ``upper_mads`` is set.
    """
    areas = np.asarray(areas, dtype=np.float64)
    keep = areas >= 4
    ref = areas[keep]
    if len(ref) >= 5:
        med = float(np.median(ref))
        mad = float(np.median(np.abs(ref - med)))
        keep &= areas >= max(4.0, med - 3 * mad)
        if upper_mads is not None:
            keep &= areas <= med + upper_mads * mad
    return keep


def extract_contours(smap, threshold: float, area_filter: bool = True,
                     upper_mads: float | None = None) -> list[Contour]:
    """Border-follow the foreground of ``smap > threshold`` (8-connectivity).

    Both outer borders and hole borders are traced, so a marker whose arms
    close into a ring still exposes its inner corners.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    scores = smap.scores if isinstance(smap, StructuralMap) else np.asarray(smap)
    binary = (scores > threshold).astype(np.uint8)
    if not binary.any():
        return []
    n, labels, stats, _ = cv2.connectedComponentsWithStats(binary, connectivity=8)
    areas = stats[1:, cv2.CC_STAT_AREA].astype(np.float64)
    keep = _area_keep(areas, upper_mads) if area_filter else np.ones(len(areas), bool)
    if not keep.any():
        return []
    lut = np.zeros(n, np.uint8)
    lut[1:][keep] = 1
    mask = lut[labels]
    found, _ = cv2.findContours(mask, cv2.RETR_LIST, cv2.CHAIN_APPROX_NONE)
    contours = [Contour(c.reshape(-1, 2).astype(np.int64), True) for c in found]
    # deterministic order: by first traced point
    contours.sort(key=lambda c: (int(c.points[:, 1].min()), int(c.points[:, 0].min()), len(c)))
    return contours


def curvature_profile(contour: Contour, r: int, eps: float) -> np.ndarray:
    """Curvature ``1 - <v_prev, v_next> / (|v_prev| |v_next| + eps)`` per point."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    pts = np.asarray(contour.points, dtype=np.float64)
    n = len(pts)
    if n < 2 * r + 1:
        raise ValueError(f"contour of {n} points too short for radius {r}")
    idx = np.arange(n)
    if contour.closed:
        back, ahead = (idx - r) % n, (idx + r) % n
    else:
        back, ahead = np.clip(idx - r, 0, n - 1), np.clip(idx + r, 0, n - 1)
    v_prev = pts - pts[back]
    v_next = pts[ahead] - pts
    dot = v_prev[:, 0] * v_next[:, 0] + v_prev[:, 1] * v_next[:, 1]
    norms = np.hypot(v_prev[:, 0], v_prev[:, 1]) * np.hypot(v_next[:, 0], v_next[:, 1])
    return 1.0 - dot / (norms + eps)


def _threshold(values: np.ndarray, p: ScreeningParams) -> float:
    if p.threshold_stat == "robust":
        med = float(np.median(values))
        return med + p.peak_sigma_factor * 1.4826 * float(np.median(np.abs(values - med)))
    return float(values.mean()) + p.peak_sigma_factor * float(values.std())


def _local_maxima(k: np.ndarray, closed: bool) -> np.ndarray:
    if closed:
        left, right = np.roll(k, 1), np.roll(k, -1)
    else:
        left = np.concatenate(([-np.inf], k[:-1]))
        right = np.concatenate((k[1:], [-np.inf]))
    return np.flatnonzero((k >= left) & (k >= right) & ((k > left) | (k > right)))


def _separated_peaks(peaks: np.ndarray, kappa: np.ndarray, n: int, closed: bool, min_sep: int) -> list[int]:
    order = sorted(peaks.tolist(), key=lambda i: (-kappa[i], i))
    accepted: list[int] = []
    for i in order:
        ok = True
        for j in accepted:
            d = abs(i - j)
            if closed:
                d = min(d, n - d)
            if d < min_sep:
                ok = False
                break
        if ok:
            accepted.append(i)
    return sorted(accepted)


def primary_screen(contours: Sequence[Contour], profiles: Sequence[np.ndarray], smap,
                   p: ScreeningParams = ScreeningParams()) -> list[CandidatePoint]:
    """Keep significant, well-separated curvature peaks on salient structure."""
    scores = smap.scores if isinstance(smap, StructuralMap) else np.asarray(smap)
    usable = [(c, np.asarray(k)) for c, k in zip(contours, profiles) if k is not None and len(k) >= 3]
    global_thr = None
    if p.threshold_scope == "global" and usable:
        global_thr = _threshold(np.concatenate([k for _, k in usable]), p)

    picked: list[CandidatePoint] = []
    for c, kappa in usable:
        thr = global_thr if global_thr is not None else _threshold(kappa, p)
        peaks = _local_maxima(kappa, c.closed)
        peaks = peaks[kappa[peaks] > thr]
        if len(peaks) == 0:
            continue
        for i in _separated_peaks(peaks, kappa, len(kappa), c.closed, p.min_peak_separation):
            x, y = (int(v) for v in c.points[i])
            picked.append(CandidatePoint(x, y, float(kappa[i]), float(scores[y, x])))

    if not picked:
        return []
    s = np.array([c.structural for c in picked])
    cut = float(np.quantile(s, 1.0 - p.structural_keep_fraction))
    return [c for c in picked if c.structural >= cut]


def screen_contours(smap, p: ScreeningParams = ScreeningParams()) -> list[CandidatePoint]:
    contours = extract_contours(smap, p.contour_threshold, upper_mads=p.area_upper_mads)
    r = p.curvature_radius
    profiles = [curvature_profile(c, r, p.epsilon) if len(c) >= 2 * r + 1 else None for c in contours]
    return primary_screen(contours, profiles, smap, p)


# --- density and mean shift ---------------------------------------------

def _canonical_order(cands: Sequence[CandidatePoint]) -> np.ndarray:
    keys = [(c.y, c.x, c.curvature, c.structural, c.density) for c in cands]
    return np.array(sorted(range(len(cands)), key=lambda i: keys[i]), dtype=np.int64)


def _pairwise(P: np.ndarray, rows: slice) -> np.ndarray:
    d = P[rows, None, :] - P[None, :, :]
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)


_CHUNK = 512


def density_field(cands: Sequence[CandidatePoint], sigma: float) -> list[CandidatePoint]:
    """Curvature-weighted Gaussian density, neighbourhood truncated at 3 sigma.

    Sums run over neighbours in a canonical (position-sorted) order so the
    result does not depend on the input ordering.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    n = len(cands)
    if n == 0:
        return []
    order = _canonical_order(cands)
    P = np.array([[cands[i].x, cands[i].y] for i in order], dtype=np.float64)
    kappa = np.array([cands[i].curvature for i in order])
    rho = np.empty(n)
    for s in range(0, n, _CHUNK):
        rows = slice(s, min(s + _CHUNK, n))
        D = _pairwise(P, rows)
        W = np.where(D <= 3 * sigma, np.exp(-(D * D) / (2 * sigma * sigma)), 0.0)
        rho[rows] = (W * kappa[None, :]).sum(axis=1)
    out = list(cands)
    for pos, i in enumerate(order):
        out[i] = replace(cands[i], density=float(rho[pos]))
    return out


def shift_positions(P: np.ndarray, rho: np.ndarray, sigma: float, h: float, iters: int) -> np.ndarray:
    """Synchronous density-weighted mean-shift updates of all positions."""
    P = P.copy()
    n = len(P)
    for _ in range(iters):
        new = np.empty_like(P)
        for s in range(0, n, _CHUNK):
            rows = slice(s, min(s + _CHUNK, n))
            D = _pairwise(P, rows)
            W = np.where(D <= 3 * sigma, rho[None, :] * np.exp(-D / h), 0.0)
            wsum = W.sum(axis=1)
            new[rows, 0] = (W * P[None, :, 0]).sum(axis=1) / wsum
            new[rows, 1] = (W * P[None, :, 1]).sum(axis=1) / wsum
        P = new
    return P


def mean_shift_sparsify(cands: Sequence[CandidatePoint], p: ScreeningParams = ScreeningParams(),
                        snap: bool = True) -> list[CandidatePoint]:
    """Shift candidates toward dense high-curvature regions and merge duplicates.

    Candidates ending closer than ``merge_radius`` (transitively) collapse to
    the member with the highest density. Survivors are snapped to integer
    pixels unless ``snap`` is false.
    """
    n = len(cands)
    if n == 0:
        return []
    order = _canonical_order(cands)
    base = [cands[i] for i in order]
    P = np.array([[c.x, c.y] for c in base], dtype=np.float64)
    rho = np.array([c.density for c in base])
    if np.any(rho <= 0):
        raise ValueError("density_field must run first (all densities must be > 0)")
    P = shift_positions(P, rho, p.density_sigma, p.shift_h, p.shift_iters)

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for s in range(0, n, _CHUNK):
        rows = slice(s, min(s + _CHUNK, n))
        D = _pairwise(P, rows)
        ii, jj = np.nonzero(D < p.merge_radius)
        for i, j in zip(ii + s, jj):
            if i < j:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    best: dict[int, int] = {}
    for i in range(n):
        r = find(i)
        if r not in best or rho[i] > rho[best[r]]:
            best[r] = i
    out = []
    for i in sorted(best.values()):
        x, y = P[i]
        if snap:
            x, y = math.floor(x + 0.5), math.floor(y + 0.5)
        out.append(replace(base[i], x=float(x), y=float(y)))
    return out


# --- grid entropy --------------------------------------------------------

def _cells(cands: Sequence[CandidatePoint], cell: int) -> list[tuple[int, int]]:
    return [(math.floor(c.x / cell), math.floor(c.y / cell)) for c in cands]


def entropy_of_counts(counts) -> float:
    counts = np.asarray([c for c in counts if c > 0], dtype=np.float64)
    if counts.size == 0:
        return 0.0
    P = counts / counts.sum()
    return float(-(P * np.log(P)).sum())


def grid_entropy(cands: Sequence[CandidatePoint], cell: int, extent: tuple[int, int] | None = None) -> float:
    """Shannon entropy of candidate counts over square grid cells."""
    if cell < 1:
        raise ValueError("cell must be >= 1")
    if not cands:
        return 0.0
    counts: dict[tuple[int, int], int] = {}
    for key in _cells(cands, cell):
        counts[key] = counts.get(key, 0) + 1
    return entropy_of_counts(sorted(counts.values()))


def removal_gains(cands: Sequence[CandidatePoint], cell: int, protected: set[int] = frozenset()):
    """Entropy change for removing each candidate (None where not allowed)."""
    keys = _cells(cands, cell)
    counts: dict[tuple[int, int], int] = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    base = entropy_of_counts(sorted(counts.values()))
    gain_of_cell = {}
    for k in counts:
        trial = dict(counts)
        trial[k] -= 1
        gain_of_cell[k] = entropy_of_counts(sorted(trial.values())) - base
    return [None if i in protected else gain_of_cell[k] for i, k in enumerate(keys)], base


def _protected(cands: Sequence[CandidatePoint], keys, cell_median: dict) -> set[int]:
    per_cell: dict[tuple[int, int], list[int]] = {}
    for i, k in enumerate(keys):
        per_cell.setdefault(k, []).append(i)
    prot = set()
    for k, members in per_cell.items():
        if len(members) == 1 and cands[members[0]].curvature > cell_median[k]:
            prot.add(members[0])
    return prot


def entropy_prune(cands: Sequence[CandidatePoint], p: ScreeningParams = ScreeningParams(),
                  extent: tuple[int, int] | None = None) -> list[CandidatePoint]:
    """Greedily drop the candidate whose removal raises grid entropy the most.

    Stops once the entropy target is reached or no removal increases entropy.
    Ties go to the lowest density, then lowest curvature, then input order.
    A cell's last candidate is kept if its curvature exceeds the median
    curvature that cell started with.
    """
    alive = list(cands)
    if not alive:
        return []
    keys0 = _cells(alive, p.grid_cell)
    groups: dict[tuple[int, int], list[float]] = {}
    for c, k in zip(alive, keys0):
        groups.setdefault(k, []).append(c.curvature)
    cell_median = {k: float(np.median(v)) for k, v in groups.items()}
    target = p.entropy_target
    if target is None:
        target = p.entropy_target_ratio * math.log(len(groups))

    H = grid_entropy(alive, p.grid_cell)
    while H < target and len(alive) > 1:
        keys = _cells(alive, p.grid_cell)
        gains, H = removal_gains(alive, p.grid_cell, _protected(alive, keys, cell_median))
        best = None
        for i, g in enumerate(gains):
            if g is None or g <= 0:
                continue
            rank = (-g, alive[i].density, alive[i].curvature, i)
            if best is None or rank < best[0]:
                best = (rank, i)
        if best is None:
            break
        del alive[best[1]]
        H = grid_entropy(alive, p.grid_cell)
    return alive


def screen(smap, p: ScreeningParams = ScreeningParams()) -> list[CandidatePoint]:
    """Full screening chain: contours -> peaks -> density -> mean shift -> entropy."""
    cands = screen_contours(smap, p)
    if not cands:
        return []
    cands = density_field(cands, p.density_sigma)
    cands = mean_shift_sparsify(cands, p)
    return entropy_prune(cands, p, (smap.width, smap.height) if isinstance(smap, StructuralMap) else None)
