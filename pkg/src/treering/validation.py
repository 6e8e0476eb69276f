"""Input validation helpers shared across the pipeline.

Conventions used everywhere in this package:

* RGB images are ``uint8`` arrays of shape ``(H, W, 3)``.
* Binary masks are ``uint8`` arrays of shape ``(H, W)`` with values in {0, 1}.
* Probability maps are ``float32`` arrays of shape ``(H, W)`` with values in [0, 1].
* Point coordinates are ``(x, y)`` pairs: x = column, y = row, y axis pointing down.
"""

from __future__ import annotations

import numpy as np


def check_rgb_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate an RGB image array and return it as contiguous uint8 (H, W, 3)."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name}: expected (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name}: empty raster {arr.shape}")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255:
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"{name}: expected uint8 samples, got {arr.dtype}")
    return np.ascontiguousarray(arr)


def check_mask(mask: np.ndarray, shape: tuple[int, int] | None = None,
               name: str = "mask") -> np.ndarray:
    """Validate a binary mask and return it as uint8 with values in {0, 1}."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name}: expected non-empty 2-D array, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name}: dimensions {arr.shape} do not match expected {tuple(shape)}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    vals = np.unique(arr)
    if not np.isin(vals, (0, 1)).all():
        if np.isin(vals, (0, 255)).all():
            return (arr > 0).astype(np.uint8)
        raise ValueError(f"{name}: mask values must be binary, found {vals[:8]}")
    return arr.astype(np.uint8)


def check_probability_map(pmap: np.ndarray, shape: tuple[int, int] | None = None,
                          name: str = "probability map") -> np.ndarray:
    """Validate a unit-interval probability map, returning float32 clipped to [0, 1].

    A small tolerance (1e-3) absorbs interpolation round-off; anything further
    outside [0, 1] is rejected.
    """
    arr = np.asarray(pmap)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name}: expected non-empty 2-D array, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name}: dimensions {arr.shape} do not match expected {tuple(shape)}")
    arr = arr.astype(np.float32, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < -1e-3 or hi > 1 + 1e-3:
        raise ValueError(f"{name}: values outside [0, 1] (min {lo:.4g}, max {hi:.4g})")
    if lo < 0.0 or hi > 1.0:
        arr = np.clip(arr, 0.0, 1.0)
    return arr


def check_pith(pith, shape: tuple[int, int], name: str = "pith"):
    """Validate that a pith lies inside a raster of shape (H, W); returns a Pith."""
    from .raster import Pith

    if not isinstance(pith, Pith):
        try:
            cx, cy = float(pith[0]), float(pith[1])
        except (TypeError, IndexError) as exc:
            raise ValueError(f"{name}: expected Pith or (cx, cy) pair") from exc
        pith = Pith(cx, cy)
    h, w = shape[:2]
    if not (0 <= pith.cx < w and 0 <= pith.cy < h):
        raise ValueError(
            f"{name}: ({pith.cx}, {pith.cy}) outside raster bounds {w}x{h}")
    return pith
