"""Disc normalization: background whitening, crop-to-disc, aspect-preserving resize.

Every geometric step is captured in a :class:`PreprocessTransform` so pith and
ring coordinates can be mapped between the original and working frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .validation import check_mask, check_rgb_image

DEFAULT_MARGIN = 50
DEFAULT_TARGET = 1504


@dataclass(frozen=True)
class PreprocessTransform:
    """Affine map between original and working coordinates.

    forward:  working = (original - crop_offset) * scale
    inverse:  original = working / scale + crop_offset

    ``pad`` records the white padding (right, bottom) added after scaling; it
    does not affect coordinates but makes the transform fully invertible.
    """

    crop_offset: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    pad: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def compose_resize(self, scale: float, pad: tuple[int, int]) -> "PreprocessTransform":
        """Append a resize stage (crop offsets are unscaled originals)."""
        return PreprocessTransform(self.crop_offset, self.scale * scale, pad)


def map_coords(transform: PreprocessTransform, pts, direction: str = "forward") -> np.ndarray:
    """Map (x, y) coordinates through the transform, forward or inverse."""
    arr = np.asarray(pts, dtype=np.float64)
    squeeze = arr.ndim == 1
    arr = np.atleast_2d(arr)
    off = np.asarray(transform.crop_offset, dtype=np.float64)
    if direction == "forward":
        out = (arr - off) * transform.scale
    elif direction == "inverse":
        out = arr / transform.scale + off
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return out[0] if squeeze else out


def whiten_background(image: np.ndarray, disc_mask: np.ndarray) -> np.ndarray:
    """Set every pixel outside the disc mask to white; disc pixels unchanged."""
    image = check_rgb_image(image)
    disc_mask = check_mask(disc_mask, shape=image.shape[:2], name="disc_mask")
    out = image.copy()
    out[disc_mask == 0] = 255
    return out


def crop_to_disc(image: np.ndarray, disc_mask: np.ndarray,
                 margin: int = DEFAULT_MARGIN) -> tuple[np.ndarray, PreprocessTransform]:
    """Crop to the disc bounding box expanded by ``margin`` pixels per side.

    Where the expansion exceeds the original image, white padding is inserted
    so the margin is honored exactly; the returned transform records the crop
    origin in original coordinates (possibly negative).
    """
    image = check_rgb_image(image)
    disc_mask = check_mask(disc_mask, shape=image.shape[:2], name="disc_mask")
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    ys, xs = np.nonzero(disc_mask)
    if ys.size == 0:
        raise ValueError("crop_to_disc: disc mask is empty")
    x0 = int(xs.min()) - margin
    y0 = int(ys.min()) - margin
    x1 = int(xs.max()) + margin + 1
    y1 = int(ys.max()) + margin + 1
    out = np.full((y1 - y0, x1 - x0, 3), 255, dtype=np.uint8)
    sx0, sy0 = max(x0, 0), max(y0, 0)
    sx1, sy1 = min(x1, image.shape[1]), min(y1, image.shape[0])
    out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = image[sy0:sy1, sx0:sx1]
    return out, PreprocessTransform(crop_offset=(float(x0), float(y0)))


def resize_pad(image: np.ndarray, target: int = DEFAULT_TARGET
               ) -> tuple[np.ndarray, PreprocessTransform]:
    """Scale the larger dimension to ``target`` (3-lobed Lanczos) and pad white.

    Padding goes to the right/bottom so the output is exactly target x target.
    """
    image = check_rgb_image(image)
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    h, w = image.shape[:2]
    scale = target / max(w, h)
    new_w = target if w >= h else max(1, round(w * scale))
    new_h = target if h >= w else max(1, round(h * scale))
    if (new_w, new_h) != (w, h):
        resized = np.asarray(
            Image.fromarray(image).resize((new_w, new_h), Image.Resampling.LANCZOS))
    else:
        resized = image
    out = np.full((target, target, 3), 255, dtype=np.uint8)
    out[:new_h, :new_w] = resized
    pad = (target - new_w, target - new_h)
    return out, PreprocessTransform(scale=scale, pad=pad)


def preprocess_image(image: np.ndarray, disc_mask: np.ndarray | None = None,
                     margin: int = DEFAULT_MARGIN, target: int = DEFAULT_TARGET
                     ) -> tuple[np.ndarray, PreprocessTransform]:
    """Full normalization: whiten + crop (if a mask is given), then resize.

    ``target=0`` skips the resize and keeps the cropped (or original) size.
    Returns the working image and the combined transform.
    """
    image = check_rgb_image(image)
    transform = PreprocessTransform()
    if disc_mask is not None:
        image = whiten_background(image, disc_mask)
        image, transform = crop_to_disc(image, disc_mask, margin=margin)
    if target:
        image, rt = resize_pad(image, target=target)
        transform = transform.compose_resize(rt.scale, rt.pad)
    return image, transform
