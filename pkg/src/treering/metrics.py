"""Region rasterization and the evaluation metrics (mAR, ARAND).

Ring sets are converted to per-pixel region labels (0 = outside the disc,
1..K+1 = annuli ordered pith to bark) and compared with instance-recall and
pair-counting statistics; the background label is excluded from both metrics.
"""

from __future__ import annotations

import cv2
import numpy as np

from .grouping import RingSet, check_noncrossing
from .validation import check_mask

IOU_THRESHOLDS = np.arange(50, 100, 5) / 100.0
_SHIFT = 3  # sub-pixel bits for polygon rasterization


def _fill_polygon(shape: tuple[int, int], polygon: np.ndarray) -> np.ndarray:
    mask = np.zeros(shape, dtype=np.uint8)
    pts = np.round(np.asarray(polygon, dtype=np.float64) * (1 << _SHIFT))
    cv2.fillPoly(mask, [pts.astype(np.int32).reshape(-1, 1, 2)], 1, shift=_SHIFT)
    return mask


def _check_nested(polygons: list[np.ndarray]) -> None:
    """Closed ring polylines must be nested innermost-to-outermost."""
    for i in range(len(polygons) - 1):
        outer = np.asarray(polygons[i + 1], dtype=np.float32).reshape(-1, 1, 2)
        for x, y in np.asarray(polygons[i], dtype=np.float64):
            if cv2.pointPolygonTest(outer, (float(x), float(y)), True) < -1.5:
                raise ValueError(
                    f"rings cross: ring {i} has a vertex outside ring {i + 1}")


def rasterize_regions(rings, disc_mask: np.ndarray) -> np.ndarray:
    """Label disc pixels by the annulus they fall in.

    ``rings`` is a RingSet or a list of closed polygons ordered pith to bark.
    With K rings, a pixel contained in ``c`` ring polygons gets label
    K + 1 - c (clipped to [1, K + 1]); pixels outside the disc mask get 0.
    """
    disc_mask = check_mask(disc_mask, name="disc_mask")
    if isinstance(rings, RingSet):
        violations = check_noncrossing(rings)
        if violations:
            raise ValueError(f"rings cross at (ray, i, j) = {violations[:5]}")
        polygons = rings.polylines()
    else:
        polygons = [np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in rings]
        order = np.argsort([cv2.contourArea(p.astype(np.float32)) for p in polygons])
        polygons = [polygons[i] for i in order]
        _check_nested(polygons)
    k = len(polygons)
    contained = np.zeros(disc_mask.shape, dtype=np.int32)
    for poly in polygons:
        contained += _fill_polygon(disc_mask.shape, poly)
    labels = np.clip(k + 1 - contained, 1, k + 1).astype(np.int32)
    labels[disc_mask == 0] = 0
    return labels


def _contingency(pred: np.ndarray, gt: np.ndarray):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"label maps differ in shape: {pred.shape} vs {gt.shape}")
    keep = (pred > 0) & (gt > 0)
    p = pred[keep].ravel()
    g = gt[keep].ravel()
    pred_ids, p_idx = np.unique(p, return_inverse=True)
    gt_ids, g_idx = np.unique(g, return_inverse=True)
    table = np.zeros((pred_ids.size, gt_ids.size), dtype=np.int64)
    np.add.at(table, (p_idx, g_idx), 1)
    return table, pred_ids, gt_ids


def mean_average_recall(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean Average Recall over IoU thresholds 0.50:0.05:0.95.

    Ground-truth regions are matched one-to-one to predicted regions greedily
    by descending IoU; recall at each threshold counts matches with IoU at or
    above it. Background (label 0) is excluded. With no ground-truth regions
    the recall is vacuously 1.
    """
    table, pred_ids, gt_ids = _contingency(pred, gt)
    gt_all, gt_counts = np.unique(gt[gt > 0], return_counts=True)
    if gt_all.size == 0:
        return 1.0
    n_gt_total = int(gt_all.size)
    pred_all, pred_counts = np.unique(pred[pred > 0], return_counts=True)
    pred_areas = dict(zip(pred_all.tolist(), pred_counts.tolist()))
    gt_areas = dict(zip(gt_all.tolist(), gt_counts.tolist()))

    pairs = []
    for pi, pid in enumerate(pred_ids):
        for gi, gid in enumerate(gt_ids):
            inter = table[pi, gi]
            if inter == 0:
                continue
            union = pred_areas[pid] + gt_areas[gid] - inter
            pairs.append((inter / union, int(gid), int(pid)))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))

    matched_iou = []
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    for iou, gid, pid in pairs:
        if gid in used_gt or pid in used_pred:
            continue
        used_gt.add(gid)
        used_pred.add(pid)
        matched_iou.append(iou)
    matched_iou = np.asarray(matched_iou)

    recalls = [(matched_iou >= t).sum() / n_gt_total for t in IOU_THRESHOLDS]
    return float(np.mean(recalls))


def adapted_rand_error(pred: np.ndarray, gt: np.ndarray) -> float:
    """Adapted Rand error: 1 - F1 of the pair-counting statistics.

    Over the contingency table of label co-occurrences on foreground pixels,
    precision = sum(n_ij^2) / sum(pred marginals^2) and
    recall = sum(n_ij^2) / sum(gt marginals^2). Identical labelings (up to
    label permutation) score 0.
    """
    table, _, _ = _contingency(pred, gt)
    if table.size == 0 or table.sum() == 0:
        return 0.0
    sum_sq = float((table.astype(np.float64) ** 2).sum())
    pred_marg = float((table.sum(axis=1).astype(np.float64) ** 2).sum())
    gt_marg = float((table.sum(axis=0).astype(np.float64) ** 2).sum())
    precision = sum_sq / pred_marg
    recall = sum_sq / gt_marg
    f1 = 2.0 * precision * recall / (precision + recall)
    return 1.0 - f1
