"""Ground-truth mask rasterization from ring annotations."""

from __future__ import annotations

import cv2
import numpy as np

from .annotations import Annotation

DEFAULT_THICKNESS = 3


def _stroke_polyline(mask: np.ndarray, poly: np.ndarray, half: float) -> None:
    """Mark pixels whose center lies within ``half`` of the closed polyline.

    Computed as an exact point-to-segment distance band (round caps/joins),
    so the stroke is stable under geometric transforms of the vertices.
    Candidate pixels come from a dilated 1-px rasterization of the polyline.
    """
    h, w = mask.shape
    coarse = np.zeros_like(mask)
    ipts = np.round(poly).astype(np.int32).reshape(-1, 1, 2)
    cv2.polylines(coarse, [ipts], True, 1, thickness=1, lineType=cv2.LINE_8)
    reach = int(np.ceil(half)) + 2
    kernel = np.ones((2 * reach + 1, 2 * reach + 1), np.uint8)
    ys, xs = np.nonzero(cv2.dilate(coarse, kernel))
    if ys.size == 0:
        return
    pts = np.stack([xs, ys], axis=1).astype(np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    d2min = np.full(pts.shape[0], np.inf)
    for seg_a, seg_b in zip(a, b):
        ab = seg_b - seg_a
        denom = float(ab @ ab)
        if denom < 1e-12:
            proj = seg_a[None, :]
        else:
            t = np.clip(((pts - seg_a) @ ab) / denom, 0.0, 1.0)
            proj = seg_a + t[:, None] * ab
        d2 = ((pts - proj) ** 2).sum(axis=1)
        np.minimum(d2min, d2, out=d2min)
    hit = d2min <= half * half
    mask[ys[hit], xs[hit]] = 1


def rasterize_gt(annotation: Annotation, thickness: int = DEFAULT_THICKNESS) -> np.ndarray:
    """Stroke every ring polyline into a binary mask (uint8 {0,1})."""
    if thickness < 1:
        raise ValueError(f"thickness must be >= 1, got {thickness}")
    mask = np.zeros((annotation.height, annotation.width), np.uint8)
    for ring in annotation.rings:
        _stroke_polyline(mask, np.asarray(ring, dtype=np.float64), thickness / 2.0)
    return mask
