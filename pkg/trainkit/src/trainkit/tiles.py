"""Non-overlapping training tiles with ring presence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TILE_SIZE = 256


@dataclass
class TrainingTile:
    image: np.ndarray   # (ts, ts, 3) uint8
    target: np.ndarray  # (ts, ts) uint8 {0,1}, at least one foreground pixel
    origin: tuple[int, int]


def make_tiles(image: np.ndarray, gt_mask: np.ndarray,
               tile_size: int = DEFAULT_TILE_SIZE) -> list[TrainingTile]:
    """Cut a non-overlapping grid; keep only tiles containing ring pixels.

    Edge remainders are zero-padded to the full tile size. ``tile_size=0``
    yields the whole image as a single tile (zero-padded up to a multiple of
    32 so the network accepts it).
    """
    if image.shape[:2] != gt_mask.shape:
        raise ValueError(f"image {image.shape[:2]} and mask {gt_mask.shape} differ")
    h, w = gt_mask.shape
    if tile_size == 0:
        ph = (32 - h % 32) % 32
        pw = (32 - w % 32) % 32
        img = np.pad(image, ((0, ph), (0, pw), (0, 0)))
        tgt = np.pad(gt_mask, ((0, ph), (0, pw)))
        return [TrainingTile(img, tgt, (0, 0))] if tgt.any() else []
    if tile_size < 32 or tile_size % 32:
        raise ValueError(f"tile_size must be 0 or a multiple of 32, got {tile_size}")
    tiles = []
    for y in range(0, h, tile_size):
        for x in range(0, w, tile_size):
            img = image[y:y + tile_size, x:x + tile_size]
            tgt = gt_mask[y:y + tile_size, x:x + tile_size]
            if not tgt.any():
                continue
            ph = tile_size - img.shape[0]
            pw = tile_size - img.shape[1]
            if ph or pw:
                img = np.pad(img, ((0, ph), (0, pw), (0, 0)))
                tgt = np.pad(tgt, ((0, ph), (0, pw)))
            tiles.append(TrainingTile(img, tgt, (x, y)))
    return tiles
