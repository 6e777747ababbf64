"""Grayscale image container and raster I/O.

Intensities live in [0, 1] as float64, stored row-major with x to the right
and y downward (``data[y, x]``), which is the raster file order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

PathLike = Union[str, os.PathLike]


class ImageIOError(Exception):
    """Base class for image loading/saving failures."""


class ImageNotFoundError(ImageIOError, FileNotFoundError):
    pass


class UnsupportedFormatError(ImageIOError, ValueError):
    pass


class EmptyImageError(ImageIOError, ValueError):
    pass


class ImageWriteError(ImageIOError, OSError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 2-D intensity raster with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"GrayImage needs a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise EmptyImageError(f"zero-dimension image {arr.shape[1]}x{arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("GrayImage intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("GrayImage intensities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def clipped(cls, arr) -> "GrayImage":
        """Build an image from an arbitrary float array, clamping into [0, 1]."""
        return cls(np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)


def as_array(img) -> np.ndarray:
    """Return the float64 intensity array behind a GrayImage or array-like."""
    if isinstance(img, GrayImage):
        return img.data
    return np.asarray(img, dtype=np.float64)


# --- PGM ------------------------------------------------------------------

def _read_pgm(raw: bytes, path) -> np.ndarray:
    if raw[:2] != b"P5":
        raise UnsupportedFormatError(f"{path}: only binary PGM (P5) is supported")
    fields = []
    pos = 2
    n = len(raw)
    while len(fields) < 3:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnsupportedFormatError(f"{path}: truncated PGM header")
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise EmptyImageError(f"{path}: zero-dimension image")
    if not 0 < maxval < 65536:
        raise UnsupportedFormatError(f"{path}: bad PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    body = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    if body.size != count:
        raise UnsupportedFormatError(f"{path}: truncated PGM raster")
    return body.reshape(height, width).astype(np.float64) / maxval


def _write_pgm(path, counts: np.ndarray, maxval: int) -> None:
    h, w = counts.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(counts.astype(dtype).tobytes())


# --- public API ----------------------------------------------------------

def load_gray(path: PathLike) -> GrayImage:
    """Read a PGM (P5, 8/16-bit) or PNG file into a GrayImage.

    Integer counts are mapped linearly onto [0, 1] using the source bit depth.
    Colour sources are reduced with an unweighted channel mean.
    """
    p = Path(path)
    if not p.is_file():
        raise ImageNotFoundError(f"no such image file: {p}")
    raw = p.read_bytes()
    if raw[:2] in (b"P5", b"P2", b"P1", b"P4", b"P3", b"P6"):
        arr = _read_pgm(raw, p)
    elif raw[:8] == b"\x89PNG\r\n\x1a\n":
        arr = _read_png(p)
    else:
        raise UnsupportedFormatError(f"{p}: unsupported raster format")
    if arr.size == 0:
        raise EmptyImageError(f"{p}: zero-dimension image")
    return GrayImage(arr)


def _read_png(p: Path) -> np.ndarray:
    with Image.open(p) as im:
        im.load()
        if im.width == 0 or im.height == 0:
            raise EmptyImageError(f"{p}: zero-dimension image")
        mode = im.mode
        if mode == "P":
            im = im.convert("RGBA" if "transparency" in im.info else "RGB")
            mode = im.mode
        arr = np.asarray(im)
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        # Pillow widens 16-bit grayscale PNGs to mode "I"
        return arr.astype(np.float64) / 65535.0
    if mode == "1":
        return arr.astype(np.float64)
    if mode in ("L", "LA", "RGB", "RGBA"):
        a = arr.astype(np.float64) / 255.0
        if a.ndim == 3:
            nch = 3 if mode in ("RGB", "RGBA") else 1
            a = a[..., :nch].mean(axis=2)
        return a
    raise UnsupportedFormatError(f"{p}: unsupported PNG mode {mode}")


def quantize(img, bit_depth: int = 8) -> np.ndarray:
    """Integer counts for ``img`` at the given depth, ties rounded half up."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    maxval = 255 if bit_depth == 8 else 65535
    arr = as_array(img)
    return np.floor(np.clip(arr, 0.0, 1.0) * maxval + 0.5).astype(np.int64)


def save_gray(img, path: PathLike, bit_depth: int = 8) -> None:
    """Write ``img`` as PGM (P5) or PNG, chosen by file extension."""
    if not isinstance(img, GrayImage):
        img = GrayImage(img)
    p = Path(path)
    counts = quantize(img, bit_depth)
    maxval = 255 if bit_depth == 8 else 65535
    suffix = p.suffix.lower()
    try:
        if suffix in (".pgm", ".pnm"):
            _write_pgm(p, counts, maxval)
        elif suffix == ".png":
            dtype = np.uint8 if bit_depth == 8 else np.uint16
            Image.fromarray(counts.astype(dtype)).save(p, format="PNG")
        else:
            raise UnsupportedFormatError(f"{p}: unsupported output format {suffix!r}")
    except UnsupportedFormatError:
        raise
    except OSError as exc:
        raise ImageWriteError(f"cannot write {p}: {exc}") from exc
