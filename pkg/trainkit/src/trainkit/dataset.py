"""Dataset preparation: annotated discs to per-disc tile archives.

Expected raw layout:

    dataset/
      images/<name>.(png|jpg)
      annotations/<name>.json   (Labelme; closed "polygon" rings,
                                 optional "pith" point shape)
      masks/<name>.png          (binary disc mask, white = disc)

``prepare`` whitens the background, resizes to the working size, rasterizes
the ring strokes, optionally augments, tiles each disc and writes one .npz
per disc plus a manifest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .annotations import load_annotation
from .augment import DiscSample, augment
from .config import TrainConfig
from .gt import rasterize_gt
from .tiles import make_tiles


def _load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return (np.asarray(im.convert("L")) > 0).astype(np.uint8)


def _resize_square(image: np.ndarray, target: int) -> tuple[np.ndarray, float]:
    """Lanczos-resize the larger dimension to ``target``, pad white; (img, scale)."""
    h, w = image.shape[:2]
    scale = target / max(h, w)
    new_w = target if w >= h else max(1, round(w * scale))
    new_h = target if h >= w else max(1, round(h * scale))
    resized = np.asarray(Image.fromarray(image).resize(
        (new_w, new_h), Image.Resampling.LANCZOS))
    out = np.full((target, target, 3), 255, np.uint8)
    out[:new_h, :new_w] = resized
    return out, scale


def load_disc_samples(dataset_dir, target_size: int = 1504,
                      thickness: int = 3) -> list[DiscSample]:
    """Build one DiscSample per annotated disc found in the dataset layout."""
    dataset_dir = Path(dataset_dir)
    ann_dir = dataset_dir / "annotations"
    img_dir = dataset_dir / "images"
    mask_dir = dataset_dir / "masks"
    samples = []
    for ann_path in sorted(ann_dir.glob("*.json")):
        ann = load_annotation(ann_path)
        stem = ann_path.stem
        img_path = next((p for p in img_dir.glob(stem + ".*")), None)
        if img_path is None:
            raise FileNotFoundError(f"no image found for annotation {ann_path.name}")
        image = _load_image(img_path)
        mask_path = mask_dir / (stem + ".png")
        if mask_path.is_file():
            mask = _load_mask(mask_path)
            if mask.shape != image.shape[:2]:
                raise ValueError(f"{mask_path.name}: mask/image size mismatch")
            image = image.copy()
            image[mask == 0] = 255
        scale = 1.0
        if target_size and image.shape[:2] != (target_size, target_size):
            image, scale = _resize_square(image, target_size)
        ann.rings = [r * scale for r in ann.rings]
        ann.width = ann.height = image.shape[0]
        gt = rasterize_gt(ann, thickness=thickness)
        if ann.pith is not None:
            pith = (ann.pith[0] * scale, ann.pith[1] * scale)
        else:
            ys, xs = np.nonzero(gt) if gt.any() else (np.array([0]), np.array([0]))
            pith = (float(xs.mean()), float(ys.mean()))
        samples.append(DiscSample(stem, image, gt, pith,
                                  rings=ann.rings, thickness=thickness))
    if not samples:
        raise FileNotFoundError(f"no annotations under {ann_dir}")
    return samples


def prepare(dataset_dir, out_dir, cfg: TrainConfig) -> dict:
    """Tile every (augmented) disc into out_dir; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = load_disc_samples(dataset_dir, target_size=cfg.target_size,
                                thickness=cfg.thickness)
    samples = augment(samples, fraction=cfg.augment_fraction,
                      variants=cfg.augment_variants, seed=cfg.seed)
    manifest = {"tile_size": cfg.tile_size, "thickness": cfg.thickness,
                "discs": []}
    for sample in samples:
        tiles = make_tiles(sample.image, sample.gt_mask, tile_size=cfg.tile_size)
        if not tiles:
            continue
        images = np.stack([t.image for t in tiles])
        targets = np.stack([t.target for t in tiles])
        npz = out_dir / f"{sample.name}.npz"
        np.savez_compressed(npz, images=images, targets=targets)
        manifest["discs"].append({"name": sample.name, "file": npz.name,
                                  "n_tiles": len(tiles)})
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def load_prepared(data_dir) -> list[dict]:
    """Load prepared per-disc tile arrays: [{name, images, targets}, ...]."""
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    discs = []
    for entry in manifest["discs"]:
        with np.load(data_dir / entry["file"]) as npz:
            discs.append({"name": entry["name"], "images": npz["images"],
                          "targets": npz["targets"]})
    return discs
