"""Raster containers, geometric warps and raw-map file formats.

Rasters are plain numpy arrays (see :mod:`treering.validation` for the
conventions). Rotations are expressed in degrees, counter-clockwise positive
with the image y axis pointing down, and are always taken about an arbitrary
center (normally the pith).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

PMAP_MAGIC = b"PMAP"


@dataclass(frozen=True)
class Pith:
    """Pith position in pixel coordinates (sub-pixel allowed)."""

    cx: float
    cy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy], dtype=np.float64)


def rotate_about(raster: np.ndarray, pith: Pith, theta: float, fill) -> np.ndarray:
    """Rotate a raster by ``theta`` degrees about the pith.

    Output pixels are bilinear samples of the input at the inverse-rotated
    location; samples falling outside the input take ``fill`` (use 255 for RGB
    images, 0.0 for probability maps). Dimensions are preserved. ``theta`` that
    reduces to 0 mod 360 returns a bit-exact copy.
    """
    arr = np.asarray(raster)
    if arr.ndim not in (2, 3) or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"rotate_about: malformed raster shape {arr.shape}")
    theta = float(theta) % 360.0
    if theta == 0.0:
        return arr.copy()
    h, w = arr.shape[:2]
    matrix = cv2.getRotationMatrix2D((float(pith.cx), float(pith.cy)), theta, 1.0)
    if arr.ndim == 3:
        border = tuple(float(v) for v in np.broadcast_to(fill, (arr.shape[2],)))
    else:
        border = float(fill)
    return cv2.warpAffine(
        arr, matrix, (w, h),
        flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=border)


def accumulate_mean(maps: list[np.ndarray]) -> np.ndarray:
    """Pointwise arithmetic mean of probability maps, in fixed input order.

    Accumulation runs in float64 so the result is permutation-invariant well
    below 1e-6 per pixel; the output is float32.
    """
    if not maps:
        raise ValueError("accumulate_mean: empty map list")
    shape = np.asarray(maps[0]).shape
    acc = np.zeros(shape, dtype=np.float64)
    for i, m in enumerate(maps):
        arr = np.asarray(m)
        if arr.shape != shape:
            raise ValueError(
                f"accumulate_mean: map {i} has shape {arr.shape}, expected {shape}")
        acc += arr
    return (acc / len(maps)).astype(np.float32)


def write_pmap(path, pmap: np.ndarray) -> None:
    """Write a probability map in the raw PMAP format.

    Layout: magic ``PMAP``, width (u32 LE), height (u32 LE), then width*height
    float32 LE samples, row-major.
    """
    arr = np.asarray(pmap, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"write_pmap: expected 2-D map, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(PMAP_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(arr.astype("<f4").tobytes(order="C"))


def read_pmap(path) -> np.ndarray:
    """Read a probability map written by :func:`write_pmap`."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != PMAP_MAGIC:
        raise ValueError(f"{path}: not a PMAP file")
    w, h = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * w * h
    if len(data) != expected:
        raise ValueError(f"{path}: truncated PMAP ({len(data)} bytes, expected {expected})")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w).astype(np.float32)


def load_image(path) -> np.ndarray:
    """Load an image file as an RGB uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def load_mask(path) -> np.ndarray:
    """Load a binary mask image; any nonzero sample counts as foreground."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 0).astype(np.uint8)


def save_png(path, raster: np.ndarray) -> None:
    """Write an image or mask as PNG; {0,1} masks are scaled to {0,255}."""
    arr = np.asarray(raster)
    if arr.ndim == 2 and arr.dtype != np.uint8:
        arr = arr.astype(np.uint8)
    if arr.ndim == 2 and arr.max(initial=0) <= 1:
        arr = arr * 255
    Image.fromarray(arr).save(path)


def draw_polylines(image: np.ndarray, polylines, color=(0, 0, 255),
                   thickness: int = 1, closed: bool = True) -> np.ndarray:
    """Return a copy of ``image`` with polylines drawn on it.

    Coordinates are (x, y) float arrays; drawing uses 3-bit sub-pixel
    precision. Default color is blue (RGB) at 1 px thickness.
    """
    out = np.ascontiguousarray(image.copy())
    shift = 3
    for poly in polylines:
        pts = np.round(np.asarray(poly, dtype=np.float64) * (1 << shift))
        pts = pts.astype(np.int32).reshape(-1, 1, 2)
        cv2.polylines(out, [pts], closed, tuple(int(c) for c in color),
                      thickness=thickness, lineType=cv2.LINE_8, shift=shift)
    return out
