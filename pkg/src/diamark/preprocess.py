"""Noise suppression, illumination equalization and structural condensation.

The three stages run in a fixed order (filter -> gamma -> structural map).
All window statistics use edge-clamped (replicated) borders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .imgcore import GrayImage, as_array

# variances below this are treated as exactly zero (box-filter round-off)
_VAR_FLOOR = 1e-14


@dataclass(frozen=True)
class GdwgifParams:
    window_radius: int = 2
    lam: float = 1e-3
    edge_epsilon: float = 1e-3

    def __post_init__(self):
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.edge_epsilon <= 0:
            raise ValueError("edge_epsilon must be > 0")


@dataclass(frozen=True)
class GammaParams:
    alpha: float = 2.0
    mean_window_radius: int = 7
    gamma_min: float = 0.1

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.mean_window_radius < 0:
            raise ValueError("mean_window_radius must be >= 0")
        if self.gamma_min <= 0:
            raise ValueError("gamma_min must be > 0")


@dataclass(frozen=True)
class StructuralParams:
    scales: tuple[int, ...] = (3, 7)
    xi: float = 0.08
    t: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(d) for d in self.scales))
        if not self.scales:
            raise ValueError("at least one scale is required")
        for d in self.scales:
            if d < 3 or d % 2 == 0:
                raise ValueError(f"scale {d} must be odd and >= 3")
        if self.xi <= 0 or self.t <= 0:
            raise ValueError("xi and t must be > 0")


@dataclass(frozen=True, eq=False)
class StructuralMap:
    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def height(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class PreprocessParams:
    gdwgif: GdwgifParams = field(default_factory=GdwgifParams)
    gamma: GammaParams = field(default_factory=GammaParams)
    structural: StructuralParams = field(default_factory=StructuralParams)


def box_mean(arr: np.ndarray, size: int) -> np.ndarray:
    """Mean over a ``size`` x ``size`` window with replicated borders."""
    return uniform_filter(arr, size=size, mode="nearest")


def local_std(arr: np.ndarray, size: int) -> np.ndarray:
    m = box_mean(arr, size)
    var = box_mean(arr * arr, size) - m * m
    var[var < _VAR_FLOOR] = 0.0
    return np.sqrt(var)


def gdwgif_filter(img, p: GdwgifParams = GdwgifParams()) -> GrayImage:
    """Self-guided edge-aware filter from the per-window closed-form minimizer.

    For each window the regularizer weight is ``lam / T(k)``, where ``T`` is
    the normalized local std-dev (>1 on edges), and the slope ``a_k`` is pulled
    toward a soft edge indicator ``psi_k`` instead of toward zero.
    """
    I = as_array(img)
    size = 2 * p.window_radius + 1
    if I.shape[0] < size or I.shape[1] < size:
        raise ValueError(f"image {I.shape[1]}x{I.shape[0]} smaller than window {size}")

    mean_I = box_mean(I, size)
    var_I = box_mean(I * I, size) - mean_I * mean_I
    var_I[var_I < _VAR_FLOOR] = 0.0
    sigma = np.sqrt(var_I)

    spread = sigma + p.edge_epsilon
    edge_weight = spread / spread.mean()
    sigma_bar = sigma.mean()
    z = 4.0 * (sigma - sigma_bar) / (sigma_bar + p.edge_epsilon)
    psi = 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic, overflow-free

    reg = p.lam / edge_weight
    denom = var_I + reg
    # self-guided: cov(I, q) == var(I)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(denom > 0, (var_I + reg * psi) / denom, 1.0)
    b = mean_I - a * mean_I

    out = box_mean(a, size) * I + box_mean(b, size)
    return GrayImage.clipped(out)


def gamma_correct(img, p: GammaParams = GammaParams()) -> GrayImage:
    """Per-pixel power law with exponent ``alpha * local_mean`` (floored)."""
    I = as_array(img)
    mu = box_mean(I, 2 * p.mean_window_radius + 1)
    gamma = np.maximum(p.alpha * mu, p.gamma_min)
    return GrayImage.clipped(np.power(I, gamma))


def structural_score(sigma, xi: float, t: float):
    """Saturating structural response ``1 - exp(-(sigma/xi)^t)``."""
    return -np.expm1(-np.power(np.asarray(sigma, dtype=np.float64) / xi, t))


def structural_map(img, p: StructuralParams = StructuralParams()) -> StructuralMap:
    """Multi-scale local-contrast map, fused by per-pixel maximum."""
    I = as_array(img)
    fused = np.zeros_like(I)
    for d in p.scales:
        np.maximum(fused, structural_score(local_std(I, d), p.xi, p.t), out=fused)
    # 1 - exp(-u) rounds to 1.0 for u > ~37; keep the map strictly below 1
    np.minimum(fused, np.nextafter(1.0, 0.0), out=fused)
    return StructuralMap(fused)


@dataclass(frozen=True, eq=False)
class PreprocessResult:
    filtered: GrayImage
    equalized: GrayImage
    structural: StructuralMap


def preprocess_stages(img, p: PreprocessParams = PreprocessParams()) -> PreprocessResult:
    """Run filter -> gamma -> structural map, keeping every intermediate."""
    filtered = gdwgif_filter(img, p.gdwgif)
    equalized = gamma_correct(filtered, p.gamma)
    return PreprocessResult(filtered, equalized, structural_map(equalized, p.structural))


def preprocess(img, p: PreprocessParams = PreprocessParams()) -> tuple[GrayImage, StructuralMap]:
    """Run filter -> gamma -> structural map; returns (equalized image, map)."""
    r = preprocess_stages(img, p)
    return r.equalized, r.structural
