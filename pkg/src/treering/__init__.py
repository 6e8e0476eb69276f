"""Tree-ring delineation in wood cross-section images.

The pipeline: rotation-averaged ring-boundary probability maps (tiled,
pluggable backend), thresholding and thinning, curve tracing, radial-normal
filtering, resampling on rays from the pith, and grouping into closed
non-crossing ring curves. Plus the mAR/ARAND evaluation metrics and
Labelme-compatible annotation IO.
"""

__version__ = "0.1.0"

from .annotation import AnnotationDoc, load_annotation, save_rings
from .curves import CurveSet, trace_curves
from .detect import DetectorConfig, binarize, detect_probability, rotation_angles
from .detector import PipelineResult, TreeRingDetector
from .geometry import (Chain, Node, angle_delta, curve_normals,
                       filter_by_normal, sample_chains)
from .grouping import RingSet, check_noncrossing, connect_chains
from .metrics import adapted_rand_error, mean_average_recall, rasterize_regions
from .preprocess import (PreprocessTransform, crop_to_disc, map_coords,
                         preprocess_image, resize_pad, whiten_background)
from .raster import (Pith, accumulate_mean, load_image, load_mask, read_pmap,
                     rotate_about, save_png, write_pmap)
from .segmentation import (Backend, GradientBackend, OnnxBackend,
                           PrecomputedMapBackend, TilePlan, infer_map,
                           make_backend, plan_tiles)
from .thinning import skeletonize

__all__ = [
    "AnnotationDoc", "Backend", "Chain", "CurveSet", "DetectorConfig",
    "GradientBackend", "Node", "OnnxBackend", "PipelineResult", "Pith",
    "PrecomputedMapBackend", "PreprocessTransform", "RingSet", "TilePlan",
    "TreeRingDetector", "accumulate_mean", "adapted_rand_error", "angle_delta",
    "binarize", "check_noncrossing", "connect_chains", "crop_to_disc",
    "curve_normals", "detect_probability", "filter_by_normal", "infer_map",
    "load_annotation", "load_image", "load_mask", "make_backend", "map_coords",
    "mean_average_recall", "plan_tiles", "preprocess_image", "rasterize_regions",
    "read_pmap", "resize_pad", "rotate_about", "rotation_angles", "sample_chains",
    "save_png", "save_rings", "skeletonize", "trace_curves", "whiten_background",
]
