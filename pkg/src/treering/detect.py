"""Rotation-averaged probability inference and mask extraction.

The working image is rotated about the pith through a uniform angle fan, each
rotation is segmented independently, the maps are unrotated and averaged, and
the average is thresholded before skeletonization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Pith, accumulate_mean, rotate_about
from .segmentation import infer_map, plan_tiles
from .validation import check_pith, check_probability_map, check_rgb_image

DEFAULT_THRESHOLD = 0.2
DEFAULT_ALPHA = 45.0
DEFAULT_NUM_RAYS = 360


@dataclass(frozen=True)
class DetectorConfig:
    """Knobs for the probability-map and curve-extraction stages."""

    tile_size: int = 256
    total_rotations: int = 5
    threshold: float = DEFAULT_THRESHOLD
    alpha: float = DEFAULT_ALPHA
    num_rays: int = DEFAULT_NUM_RAYS

    def __post_init__(self):
        if self.total_rotations < 1:
            raise ValueError(f"total_rotations must be >= 1, got {self.total_rotations}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if not 0.0 < self.alpha < 90.0:
            raise ValueError(f"alpha must be in (0, 90) degrees, got {self.alpha}")
        if self.num_rays < 4:
            raise ValueError(f"num_rays must be >= 4, got {self.num_rays}")
        if self.tile_size < 0:
            raise ValueError(f"tile_size must be >= 0, got {self.tile_size}")


def rotation_angles(total_rotations: int) -> np.ndarray:
    """Uniform rotation fan: k * 360 / total_rotations for k = 0..n-1."""
    if total_rotations < 1:
        raise ValueError(f"total_rotations must be >= 1, got {total_rotations}")
    return np.arange(0.0, 360.0, 360.0 / total_rotations)


def detect_probability(image: np.ndarray, pith: Pith, cfg: DetectorConfig,
                       backend) -> np.ndarray:
    """Rotation-averaged ring-boundary probability map.

    For each angle in the fan the image is rotated about the pith (white
    fill), segmented via the tile plan, unrotated (zero fill) and the maps are
    averaged in fan order.
    """
    image = check_rgb_image(image)
    pith = check_pith(pith, image.shape[:2])
    h, w = image.shape[:2]
    plan = plan_tiles(w, h, cfg.tile_size)
    maps = []
    for theta in rotation_angles(cfg.total_rotations):
        rotated = rotate_about(image, pith, theta, fill=255)
        pred = infer_map(rotated, plan, backend)
        maps.append(rotate_about(pred, pith, -theta, fill=0.0))
    mean = accumulate_mean(maps)
    return np.clip(mean, 0.0, 1.0)


def binarize(prob_map: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Threshold a probability map: foreground where P >= threshold."""
    prob_map = check_probability_map(prob_map)
    return (prob_map >= threshold).astype(np.uint8)
