"""Disc-level data augmentation: pith rotations, occlusions, elastic warps.

All randomness flows through one seeded generator, so augmented sets are
fully reproducible. Geometric transforms are applied identically to the image
and its target: the image is resampled while the target's ring polylines are
transformed and re-rasterized (warping a 3-px stroke raster would erode it).
Occlusions destroy boundary evidence, so the target is zeroed beneath them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from .annotations import Annotation
from .gt import DEFAULT_THICKNESS, rasterize_gt

OCCLUSION_GRAY = (80, 180)
OCCLUSION_AREA = (0.02, 0.10)
ELASTIC_MAX_SHIFT = 8.0
ELASTIC_GRID = 5


@dataclass
class DiscSample:
    name: str
    image: np.ndarray    # (H, W, 3) uint8
    gt_mask: np.ndarray  # (H, W) uint8 {0,1}
    pith: tuple[float, float]
    rings: list[np.ndarray] = field(default_factory=list)  # closed polylines
    thickness: int = DEFAULT_THICKNESS


def _rasterize(sample: DiscSample, rings: list[np.ndarray]) -> np.ndarray:
    h, w = sample.gt_mask.shape
    ann = Annotation(sample.name, w, h, rings=list(rings))
    return rasterize_gt(ann, thickness=sample.thickness)


def rotate_sample(sample: DiscSample, angle: float, suffix="rot") -> DiscSample:
    h, w = sample.gt_mask.shape
    m = cv2.getRotationMatrix2D(sample.pith, float(angle), 1.0)
    img = cv2.warpAffine(sample.image, m, (w, h), flags=cv2.INTER_LINEAR,
                         borderMode=cv2.BORDER_CONSTANT, borderValue=(255, 255, 255))
    if sample.rings:
        rings = [ring @ m[:, :2].T + m[:, 2] for ring in sample.rings]
        tgt = _rasterize(sample, rings)
    else:
        rings = []
        warped = cv2.warpAffine(sample.gt_mask.astype(np.float32), m, (w, h),
                                flags=cv2.INTER_LINEAR, borderValue=0.0)
        tgt = (warped >= 0.5).astype(np.uint8)
    return DiscSample(f"{sample.name}_{suffix}", img, tgt, sample.pith,
                      rings, sample.thickness)


def occlude_sample(sample: DiscSample, rng: np.random.Generator,
                   suffix="occ") -> DiscSample:
    h, w = sample.gt_mask.shape
    img = sample.image.copy()
    tgt = sample.gt_mask.copy()
    n_poly = int(rng.integers(1, 4))
    target_area = rng.uniform(*OCCLUSION_AREA) * h * w / n_poly
    for _ in range(n_poly):
        cx = rng.uniform(0.2 * w, 0.8 * w)
        cy = rng.uniform(0.2 * h, 0.8 * h)
        radius = np.sqrt(target_area / np.pi)
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=int(rng.integers(4, 8))))
        rr = radius * rng.uniform(0.6, 1.4, size=angles.size)
        poly = np.stack([cx + rr * np.cos(angles), cy + rr * np.sin(angles)], 1)
        poly = np.round(poly).astype(np.int32)
        gray = int(rng.integers(*OCCLUSION_GRAY))
        occ = np.zeros((h, w), np.uint8)
        cv2.fillPoly(occ, [poly.reshape(-1, 1, 2)], 1)
        img[occ == 1] = (gray, gray, gray)
        tgt[occ == 1] = 0
    return DiscSample(f"{sample.name}_{suffix}", img, tgt, sample.pith,
                      sample.rings, sample.thickness)


def elastic_sample(sample: DiscSample, rng: np.random.Generator,
                   suffix="ela") -> DiscSample:
    h, w = sample.gt_mask.shape
    coarse = rng.uniform(-ELASTIC_MAX_SHIFT, ELASTIC_MAX_SHIFT,
                         size=(ELASTIC_GRID, ELASTIC_GRID, 2)).astype(np.float32)
    flow = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    flow = np.clip(flow, -ELASTIC_MAX_SHIFT, ELASTIC_MAX_SHIFT)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    img = cv2.remap(sample.image, xx + flow[..., 0], yy + flow[..., 1],
                    cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT,
                    borderValue=(255, 255, 255))
    if sample.rings:
        # remap pulls from x + flow(x); a vertex v therefore lands near
        # v - flow(v) (flow is smooth and small, so the inverse is first-order)
        rings = []
        for ring in sample.rings:
            ix = np.clip(np.round(ring[:, 0]).astype(int), 0, w - 1)
            iy = np.clip(np.round(ring[:, 1]).astype(int), 0, h - 1)
            rings.append(ring - flow[iy, ix])
        tgt = _rasterize(sample, rings)
    else:
        rings = []
        warped = cv2.remap(sample.gt_mask.astype(np.float32),
                           xx + flow[..., 0], yy + flow[..., 1],
                           cv2.INTER_LINEAR, borderValue=0.0)
        tgt = (warped >= 0.5).astype(np.uint8)
    return DiscSample(f"{sample.name}_{suffix}", img, tgt, sample.pith,
                      rings, sample.thickness)


def augment(samples: list[DiscSample], fraction: float = 0.5,
            variants: int = 3, seed: int = 0) -> list[DiscSample]:
    """Append augmented variants for a random ``fraction`` of the samples.

    Each selected disc contributes up to three variants: a random rotation
    about the pith, an occluded copy and an elastically deformed copy.
    """
    rng = np.random.default_rng(seed)
    out = list(samples)
    if fraction <= 0 or variants <= 0:
        return out
    n_pick = int(round(fraction * len(samples)))
    picked = rng.choice(len(samples), size=n_pick, replace=False) if n_pick else []
    makers = (
        lambda s: rotate_sample(s, float(rng.uniform(0, 360))),
        lambda s: occlude_sample(s, rng),
        lambda s: elastic_sample(s, rng),
    )
    for idx in sorted(picked):
        for maker in makers[:variants]:
            out.append(maker(samples[idx]))
    return out
