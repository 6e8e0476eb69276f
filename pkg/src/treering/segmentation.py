"""Ring-boundary probability maps via pluggable backends and overlap tiling.

When tiling is requested the working image is split into square tiles whose
seams overlap by 10% of the tile size; overlapping predictions are fused by
unweighted averaging and the zero-padded remainder is cropped away.

Backends receive the tile *and its origin* in the working image, so
position-aware backends (precomputed maps, coordinate stubs used in tests)
compose with tiling; content-based backends simply ignore the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from . import onnxio
from .raster import read_pmap
from .validation import check_probability_map, check_rgb_image

TILE_OVERLAP_FRACTION = 0.10
MIN_TILE_SIZE = 32


@dataclass(frozen=True)
class TilePlan:
    """Square tiling of a (width x height) working image.

    ``origins`` are (x, y) tile corners in row-major order over the padded
    image; ``pad`` is the (right, bottom) zero padding that makes the last
    tile fit exactly. ``tile_size == 0`` means a single full-image tile.
    """

    tile_size: int
    tile_shape: tuple[int, int]  # (height, width) of each tile
    overlap: int
    stride: int
    origins: tuple[tuple[int, int], ...]
    pad: tuple[int, int]
    width: int
    height: int


def _axis_origins(dim: int, tile: int, stride: int) -> tuple[list[int], int]:
    count = 0 if dim <= tile else -(-(dim - tile) // stride)  # ceil division
    origins = [i * stride for i in range(count + 1)]
    return origins, origins[-1] + tile - dim


def plan_tiles(width: int, height: int, tile_size: int) -> TilePlan:
    """Plan the tile grid for a working image.

    ``tile_size=0`` disables tiling. Otherwise the per-seam overlap is
    ``round(0.10 * tile_size)`` and tile origins advance by
    ``tile_size - overlap``.
    """
    if width < 1 or height < 1:
        raise ValueError(f"plan_tiles: empty image {width}x{height}")
    if tile_size < 0:
        raise ValueError(f"plan_tiles: tile_size must be >= 0, got {tile_size}")
    if tile_size == 0:
        return TilePlan(0, (height, width), 0, 0, ((0, 0),), (0, 0), width, height)
    if tile_size < MIN_TILE_SIZE or tile_size > max(width, height):
        raise ValueError(
            f"plan_tiles: tile_size {tile_size} outside [{MIN_TILE_SIZE}, "
            f"max(width, height) = {max(width, height)}]")
    overlap = round(TILE_OVERLAP_FRACTION * tile_size)
    stride = tile_size - overlap
    xs, pad_x = _axis_origins(width, tile_size, stride)
    ys, pad_y = _axis_origins(height, tile_size, stride)
    origins = tuple((x, y) for y in ys for x in xs)
    return TilePlan(tile_size, (tile_size, tile_size), overlap, stride,
                    origins, (pad_x, pad_y), width, height)


def infer_map(image: np.ndarray, plan: TilePlan, backend) -> np.ndarray:
    """Predict each tile and fuse into a full probability map.

    Overlapping regions receive the arithmetic mean of the contributing
    tiles; accumulation runs over ``plan.origins`` in row-major order so the
    result is deterministic regardless of how predictions might be scheduled.
    """
    image = check_rgb_image(image)
    h, w = image.shape[:2]
    if (w, h) != (plan.width, plan.height):
        raise ValueError(
            f"infer_map: plan is for {plan.width}x{plan.height}, image is {w}x{h}")
    th, tw = plan.tile_shape
    pad_x, pad_y = plan.pad
    padded = np.pad(image, ((0, pad_y), (0, pad_x), (0, 0)))
    acc = np.zeros((h + pad_y, w + pad_x), dtype=np.float64)
    cnt = np.zeros((h + pad_y, w + pad_x), dtype=np.int32)
    for i, (x, y) in enumerate(plan.origins):
        tile = padded[y:y + th, x:x + tw]
        pred = np.asarray(backend.predict(tile, (x, y)))
        if pred.shape != (th, tw):
            raise ValueError(
                f"infer_map: tile {i} at origin ({x}, {y}): backend returned "
                f"shape {pred.shape}, expected {(th, tw)}")
        if not np.isfinite(pred).all() or pred.min() < 0 or pred.max() > 1:
            raise ValueError(
                f"infer_map: tile {i} at origin ({x}, {y}): backend output "
                "outside [0, 1]")
        acc[y:y + th, x:x + tw] += pred
        cnt[y:y + th, x:x + tw] += 1
    out = (acc / cnt).astype(np.float32)
    return out[:h, :w]


class Backend:
    """Contract for segmentation backends.

    ``predict`` maps an RGB tile to a same-size probability map in [0, 1],
    deterministically. ``origin`` is the tile's (x, y) corner in the working
    image; content-based backends may ignore it.
    """

    def predict(self, tile: np.ndarray, origin: tuple[int, int]) -> np.ndarray:
        raise NotImplementedError


class GradientBackend(Backend):
    """Classical fallback: Gaussian-smoothed gradient magnitude of grayscale.

    Each tile is normalized to [0, 1] by its own 99th-percentile response
    (clipped), so the pipeline runs with no trained model present.
    """

    def __init__(self, sigma: float = 2.0):
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.sigma = float(sigma)

    def predict(self, tile, origin=(0, 0)):
        gray = cv2.cvtColor(tile, cv2.COLOR_RGB2GRAY).astype(np.float32)
        smooth = cv2.GaussianBlur(gray, (0, 0), self.sigma)
        gx = cv2.Sobel(smooth, cv2.CV_32F, 1, 0, ksize=3)
        gy = cv2.Sobel(smooth, cv2.CV_32F, 0, 1, ksize=3)
        mag = np.hypot(gx, gy)
        p99 = float(np.percentile(mag, 99))
        if p99 <= 1e-12:
            return np.zeros(tile.shape[:2], dtype=np.float32)
        return np.clip(mag / p99, 0.0, 1.0).astype(np.float32)


class PrecomputedMapBackend(Backend):
    """Serve slices of a precomputed whole-image probability map.

    The stored map must be aligned with the working image; tiles reaching
    into the zero-padded border are filled with zeros.
    """

    def __init__(self, prob_map: np.ndarray):
        self.prob_map = check_probability_map(prob_map, name="precomputed map")

    @classmethod
    def from_file(cls, path) -> "PrecomputedMapBackend":
        return cls(read_pmap(path))

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.prob_map.shape

    def predict(self, tile, origin=(0, 0)):
        th, tw = tile.shape[:2]
        x, y = origin
        out = np.zeros((th, tw), dtype=np.float32)
        h, w = self.prob_map.shape
        cw, ch = min(tw, w - x), min(th, h - y)
        if cw > 0 and ch > 0:
            out[:ch, :cw] = self.prob_map[y:y + ch, x:x + cw]
        return out


class OnnxBackend(Backend):
    """Run an ONNX segmentation graph on RGB tiles.

    The model must declare the ``output_activation`` metadata key
    ("sigmoid_included" or "logits"); logit outputs are squashed through a
    logistic here. Tiles are fed as float32 NCHW scaled to [0, 1].
    """

    ACTIVATIONS = ("sigmoid_included", "logits")

    def __init__(self, model_path, tile_size: int | None = None):
        self.model = onnxio.OnnxModel.load(model_path)
        activation = self.model.metadata.get("output_activation")
        if activation not in self.ACTIVATIONS:
            raise ValueError(
                f"{model_path}: metadata key 'output_activation' missing or "
                f"invalid (got {activation!r}, expected one of {self.ACTIVATIONS})")
        self.apply_sigmoid = activation == "logits"
        dims = self.model.input_dims
        if len(dims) != 4:
            raise ValueError(
                f"{model_path}: expected a 4-D NCHW image input, got dims {dims}")
        if dims[1] not in (None, 3):
            raise ValueError(f"{model_path}: model expects {dims[1]} channels, not 3")
        if tile_size:
            for d in (dims[2], dims[3]):
                if d is not None and d != tile_size:
                    raise ValueError(
                        f"{model_path}: model input size {dims[2]}x{dims[3]} does "
                        f"not match tile_size {tile_size}")

    def predict(self, tile, origin=(0, 0)):
        x = tile.astype(np.float32).transpose(2, 0, 1)[None] / 255.0
        out = np.asarray(self.model.run(x), dtype=np.float32)
        out = out.reshape(out.shape[-2], out.shape[-1])
        if out.shape != tile.shape[:2]:
            raise ValueError(
                f"model produced {out.shape} for a {tile.shape[:2]} tile")
        if self.apply_sigmoid:
            out = onnxio._op_sigmoid(None, [out])
        return np.clip(out, 0.0, 1.0)


def make_backend(name: str, model_path=None, pmap_path=None,
                 sigma: float = 2.0, tile_size: int | None = None) -> Backend:
    """Build a backend from CLI-style arguments."""
    if name == "gradient":
        return GradientBackend(sigma=sigma)
    if name == "neural":
        if not model_path:
            raise ValueError("neural backend requires a model path")
        return OnnxBackend(model_path, tile_size=tile_size)
    if name == "pmap":
        if not pmap_path:
            raise ValueError("pmap backend requires a probability-map path")
        return PrecomputedMapBackend.from_file(pmap_path)
    raise ValueError(f"unknown backend {name!r} (expected pmap, neural or gradient)")
