"""Weighted quadratic-surface fit around a correlation peak."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ncc import CorrelationSurface


class FitRejected(Exception):
    """Subpixel fit rejected; ``reason`` is one of REASONS."""

    REASONS = ("border", "singular", "not_maximum", "offset")

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class QuadCoeffs:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    @property
    def discriminant(self) -> float:
        return self.c * self.c - 4.0 * self.a * self.b

    def __call__(self, x, y):
        return self.a * x * x + self.b * y * y + self.c * x * y + self.d * x + self.e * y + self.f


def fit_quadratic(z: np.ndarray, sigma_w: float = 1.0) -> QuadCoeffs:
    """Gaussian-weighted least squares of ``ax^2+by^2+cxy+dx+ey+f`` on a centred window."""
    n = z.shape[0]
    if z.shape != (n, n) or n % 2 == 0 or n < 3:
        raise ValueError("window must be square with odd side >= 3")
    h = n // 2
    v, u = np.mgrid[-h:h + 1, -h:h + 1].astype(np.float64)
    u, v, zz = u.ravel(), v.ravel(), np.asarray(z, dtype=np.float64).ravel()
    A = np.stack([u * u, v * v, u * v, u, v, np.ones_like(u)], axis=1)
    sw = np.sqrt(np.exp(-(u * u + v * v) / (2.0 * sigma_w * sigma_w)))
    coef, *_ = np.linalg.lstsq(A * sw[:, None], zz * sw, rcond=None)
    return QuadCoeffs(*(float(c) for c in coef))


def stationary_offset(q: QuadCoeffs) -> tuple[float, float]:
    den = q.discriminant
    if abs(den) < 1e-12:
        raise FitRejected("singular", f"|c^2 - 4ab| = {abs(den):.3g}")
    return (2 * q.b * q.d - q.c * q.e) / den, (2 * q.a * q.e - q.c * q.d) / den


def quadratic_subpixel(surface: CorrelationSurface | np.ndarray, window: int = 5, sigma_w: float = 1.0,
                       peak: tuple[int, int] | None = None) -> tuple[float, float, QuadCoeffs]:
    """Subpixel offset of the surface maximum from the discrete peak.

    Accepts a ``CorrelationSurface`` (peak in image coordinates) or a bare
    2-D array (peak in array coordinates, default argmax).
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    if isinstance(surface, CorrelationSurface):
        vals = surface.values
        px, py = surface.peak if peak is None else peak
        px, py = px - surface.origin[0], py - surface.origin[1]
    else:
        vals = np.asarray(surface, dtype=np.float64)
        if peak is None:
            py, px = np.unravel_index(int(np.argmax(vals)), vals.shape)
        else:
            px, py = peak
    h = window // 2
    if px < h or py < h or px + h >= vals.shape[1] or py + h >= vals.shape[0]:
        raise FitRejected("border", "fit window leaves the surface")
    q = fit_quadratic(vals[py - h:py + h + 1, px - h:px + h + 1], sigma_w)
    dx, dy = stationary_offset(q)
    if not (q.a < 0 and -q.discriminant > 0):
        raise FitRejected("not_maximum", "stationary point is a saddle or minimum")
    if abs(dx) > 1 or abs(dy) > 1:
        raise FitRejected("offset", f"offset ({dx:.3f}, {dy:.3f}) beyond one pixel")
    return dx, dy, q
