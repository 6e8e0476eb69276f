"""The end-to-end detector as a scikit-learn style estimator.

``TreeRingDetector`` holds every pipeline knob as a constructor parameter
(so ``get_params``/``set_params``/``clone`` work), and ``predict`` maps an RGB
disc image plus pith to closed ring polylines in the original image frame.
There is nothing to fit: the segmentation model is supplied as a backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .curves import CurveSet, trace_curves
from .detect import DetectorConfig, binarize, detect_probability
from .geometry import Chain, filter_by_normal, sample_chains
from .grouping import RingSet, connect_chains
from .preprocess import PreprocessTransform, map_coords, preprocess_image
from .raster import Pith
from .segmentation import Backend, GradientBackend, make_backend
from .thinning import skeletonize
from .validation import check_mask, check_pith, check_rgb_image


@dataclass
class PipelineResult:
    """Every intermediate of one detection run (working frame unless noted)."""

    probability_map: np.ndarray
    mask: np.ndarray
    skeleton: np.ndarray
    curves: CurveSet
    filtered_curves: CurveSet
    chains: list[Chain]
    rings_working: RingSet
    rings: list[np.ndarray]  # closed polylines in the original frame
    transform: PreprocessTransform
    pith_working: Pith


class TreeRingDetector(BaseEstimator):
    """Delineate tree rings in a cross-section image.

    Parameters mirror the pipeline stages: probability inference (``backend``,
    ``tile_size``, ``total_rotations``), mask extraction (``threshold``),
    curve filtering (``alpha``), radial sampling (``num_rays``), chain
    grouping (``smooth_thr``, ``min_coverage``) and preprocessing (``margin``,
    ``target_size``; ``target_size=0`` keeps the input size).

    ``backend`` is a :class:`~treering.segmentation.Backend` instance or the
    string ``"gradient"`` for the model-free fallback.
    """

    def __init__(self, backend="gradient", tile_size: int = 256,
                 total_rotations: int = 5, threshold: float = 0.2,
                 alpha: float = 45.0, num_rays: int = 360,
                 smooth_thr: float = 2.0, min_coverage: float = 0.9,
                 margin: int = 50, target_size: int = 1504):
        self.backend = backend
        self.tile_size = tile_size
        self.total_rotations = total_rotations
        self.threshold = threshold
        self.alpha = alpha
        self.num_rays = num_rays
        self.smooth_thr = smooth_thr
        self.min_coverage = min_coverage
        self.margin = margin
        self.target_size = target_size

    def _config(self) -> DetectorConfig:
        return DetectorConfig(tile_size=self.tile_size,
                              total_rotations=self.total_rotations,
                              threshold=self.threshold, alpha=self.alpha,
                              num_rays=self.num_rays)

    def _resolve_backend(self) -> Backend:
        if isinstance(self.backend, str):
            return make_backend(self.backend)
        if hasattr(self.backend, "predict"):
            return self.backend
        raise ValueError(f"backend must be a Backend or name, got {self.backend!r}")

    def fit(self, X=None, y=None):
        """No-op (the detector is configuration-only); validates parameters."""
        self._config()
        self._resolve_backend()
        return self

    def predict(self, image: np.ndarray, pith, disc_mask=None) -> list[np.ndarray]:
        """Detect rings; returns closed polylines in original coordinates."""
        return self.predict_full(image, pith, disc_mask).rings

    def predict_full(self, image: np.ndarray, pith,
                     disc_mask=None) -> PipelineResult:
        """Run the full pipeline and keep every intermediate product."""
        cfg = self._config()
        backend = self._resolve_backend()
        image = check_rgb_image(image)
        pith = check_pith(pith, image.shape[:2])
        if disc_mask is not None:
            disc_mask = check_mask(disc_mask, shape=image.shape[:2])
            ix, iy = int(round(pith.cx)), int(round(pith.cy))
            if disc_mask[min(iy, disc_mask.shape[0] - 1),
                         min(ix, disc_mask.shape[1] - 1)] == 0:
                raise ValueError(f"pith ({pith.cx}, {pith.cy}) lies outside the disc mask")

        working, transform = preprocess_image(
            image, disc_mask, margin=self.margin, target=self.target_size)
        wx, wy = map_coords(transform, (pith.cx, pith.cy), "forward")
        pith_working = check_pith((wx, wy), working.shape[:2], name="working pith")

        prob = detect_probability(working, pith_working, cfg, backend)
        mask = binarize(prob, cfg.threshold)
        skeleton = skeletonize(mask)
        curves = trace_curves(skeleton)
        filtered = filter_by_normal(curves, pith_working, alpha=cfg.alpha)
        chains = sample_chains(filtered, pith_working, num_rays=cfg.num_rays)
        rings_working = connect_chains(chains, pith_working, cfg.num_rays,
                                       smooth_thr=self.smooth_thr,
                                       min_coverage=self.min_coverage)
        rings = [map_coords(transform, poly, "inverse")
                 for poly in rings_working.polylines()]
        return PipelineResult(
            probability_map=prob, mask=mask, skeleton=skeleton, curves=curves,
            filtered_curves=filtered, chains=chains, rings_working=rings_working,
            rings=rings, transform=transform, pith_working=pith_working)
