"""Command-line interface: detect, eval, overlay.

Exit codes: 0 success, 2 unreadable/invalid inputs, 3 pith errors,
4 backend failures, 5 evaluation input errors (mismatched dimensions or
crossing rings). A result document is written iff the exit code is 0.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .annotation import load_annotation, save_rings
from .detector import TreeRingDetector
from .metrics import adapted_rand_error, mean_average_recall, rasterize_regions
from .onnxio import OnnxFormatError, UnsupportedOpError
from .raster import draw_polylines, load_image, load_mask, save_png, write_pmap
from .segmentation import make_backend

EXIT_INPUT = 2
EXIT_PITH = 3
EXIT_BACKEND = 4
EXIT_EVAL = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_pith(args, image_path: Path) -> tuple[float, float]:
    if args.pith_x is not None and args.pith_y is not None:
        return float(args.pith_x), float(args.pith_y)
    sidecar = Path(args.pith_json) if args.pith_json else \
        image_path.with_suffix(image_path.suffix + ".pith.json")
    if not sidecar.is_file():
        raise CliError(
            f"no pith given for {image_path}: pass --pith-x/--pith-y or provide "
            f"a sidecar {sidecar}", EXIT_INPUT)
    try:
        doc = json.loads(sidecar.read_text())
        return float(doc["cx"]), float(doc["cy"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{sidecar}: invalid pith sidecar ({exc})", EXIT_INPUT)


def _build_detector(args) -> TreeRingDetector:
    try:
        backend = make_backend(args.backend, model_path=args.model,
                               pmap_path=args.pmap, sigma=args.sigma,
                               tile_size=args.tile_size or None)
    except (OnnxFormatError, UnsupportedOpError, ValueError, OSError) as exc:
        raise CliError(f"backend setup failed: {exc}", EXIT_BACKEND)
    return TreeRingDetector(
        backend=backend, tile_size=args.tile_size,
        total_rotations=args.rotations, threshold=args.threshold,
        alpha=args.alpha, num_rays=args.rays, smooth_thr=args.smooth_thr,
        min_coverage=args.min_coverage, margin=args.margin,
        target_size=args.target)


def _detect_one(args, image_path: Path, output_path: Path) -> None:
    try:
        image = load_image(image_path)
    except OSError as exc:
        raise CliError(f"cannot read image {image_path}: {exc}", EXIT_INPUT)
    mask = None
    if args.mask:
        try:
            mask = load_mask(args.mask)
        except OSError as exc:
            raise CliError(f"cannot read mask {args.mask}: {exc}", EXIT_INPUT)
    pith = _load_pith(args, image_path)
    detector = _build_detector(args)
    try:
        result = detector.predict_full(image, pith, disc_mask=mask)
    except ValueError as exc:
        code = EXIT_PITH if "pith" in str(exc).lower() else EXIT_BACKEND
        raise CliError(str(exc), code)

    metadata = {
        "tool": "treering",
        "tool_version": __version__,
        "backend": args.backend,
        "model": args.model,
        "pmap": args.pmap,
        "tile_size": args.tile_size,
        "rotations": args.rotations,
        "threshold": args.threshold,
        "alpha": args.alpha,
        "rays": args.rays,
        "smooth_thr": args.smooth_thr,
        "min_coverage": args.min_coverage,
        "margin": args.margin,
        "target": args.target,
        "pith": {"cx": pith[0], "cy": pith[1]},
    }
    h, w = image.shape[:2]
    save_rings(result.rings, output_path, image_path.name, w, h, metadata=metadata)

    if args.overlay:
        save_png(args.overlay, draw_polylines(image, result.rings))
    if args.debug_dir:
        dbg = Path(args.debug_dir)
        dbg.mkdir(parents=True, exist_ok=True)
        stem = image_path.stem
        write_pmap(dbg / f"{stem}_probability.pmap", result.probability_map)
        save_png(dbg / f"{stem}_mask.png", result.mask)
        save_png(dbg / f"{stem}_skeleton.png", result.skeleton)
    print(f"{image_path}: {len(result.rings)} rings -> {output_path}")


def _detect_worker(payload):
    args, image, output = payload
    _detect_one(args, Path(image), Path(output))


def cmd_detect(args) -> int:
    images = [Path(p) for p in args.image]
    if len(images) > 1 and (args.pith_x is not None or args.pith_json):
        raise CliError("batch detection reads per-image sidecar pith files; "
                       "drop --pith-x/--pith-y/--pith-json", EXIT_INPUT)
    if len(images) == 1:
        out = Path(args.output) if args.output else images[0].with_suffix(".rings.json")
        _detect_one(args, images[0], out)
        return 0
    out_dir = Path(args.output) if args.output else Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(args, str(p), str(out_dir / f"{p.stem}.rings.json")) for p in images]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_detect_worker, jobs))
    else:
        for job in jobs:
            _detect_worker(job)
    return 0


def _regions_from_file(path: Path, disc_mask: np.ndarray) -> np.ndarray:
    doc = load_annotation(path)
    if disc_mask.shape != (doc.height, doc.width):
        raise CliError(
            f"{path}: document is {doc.width}x{doc.height} but mask is "
            f"{disc_mask.shape[1]}x{disc_mask.shape[0]}", EXIT_EVAL)
    try:
        return rasterize_regions(doc.ring_polygons(), disc_mask)
    except ValueError as exc:
        raise CliError(f"{path}: {exc}", EXIT_EVAL)


def cmd_eval(args) -> int:
    if not (len(args.pred) == len(args.gt) == len(args.mask)):
        raise CliError("--pred, --gt and --mask must list the same number of files",
                       EXIT_INPUT)
    rows = []
    for pred_path, gt_path, mask_path in zip(args.pred, args.gt, args.mask):
        try:
            mask = load_mask(mask_path)
        except OSError as exc:
            raise CliError(f"cannot read mask {mask_path}: {exc}", EXIT_INPUT)
        try:
            pred = _regions_from_file(Path(pred_path), mask)
            gt = _regions_from_file(Path(gt_path), mask)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_EVAL)
        rows.append({
            "image": Path(pred_path).stem,
            "mAR": mean_average_recall(pred, gt),
            "ARAND": adapted_rand_error(pred, gt),
        })
    summary = {
        "per_image": rows,
        "mean": {
            "mAR": float(np.mean([r["mAR"] for r in rows])),
            "ARAND": float(np.mean([r["ARAND"] for r in rows])),
        },
    }
    if args.json:
        Path(args.json).write_text(json.dumps(summary, indent=2) + "\n")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["image", "mAR", "ARAND"])
            writer.writeheader()
            writer.writerows(rows)
            writer.writerow({"image": "mean", "mAR": summary["mean"]["mAR"],
                             "ARAND": summary["mean"]["ARAND"]})
    for r in rows:
        print(f"{r['image']}: mAR {r['mAR']:.4f}  ARAND {r['ARAND']:.4f}")
    print(f"mean: mAR {summary['mean']['mAR']:.4f}  "
          f"ARAND {summary['mean']['ARAND']:.4f}")
    return 0


def cmd_overlay(args) -> int:
    try:
        image = load_image(args.image)
    except OSError as exc:
        raise CliError(f"cannot read image {args.image}: {exc}", EXIT_INPUT)
    doc = load_annotation(args.rings)
    save_png(args.output, draw_polylines(image, doc.ring_polygons()))
    print(f"{args.output}: {len(doc.ring_polygons())} rings drawn")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treering",
        description="Tree-ring delineation in wood cross-section images")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="detect rings in one or more disc images")
    d.add_argument("--image", nargs="+", required=True, help="input image(s)")
    d.add_argument("--mask", help="binary disc mask PNG (white = disc)")
    d.add_argument("--pith-x", type=float, help="pith x (single image)")
    d.add_argument("--pith-y", type=float, help="pith y (single image)")
    d.add_argument("--pith-json", help="pith sidecar JSON with {cx, cy}")
    d.add_argument("--backend", choices=["pmap", "neural", "gradient"],
                   default="gradient")
    d.add_argument("--model", help="ONNX model file (neural backend)")
    d.add_argument("--pmap", help="precomputed PMAP file (pmap backend)")
    d.add_argument("--sigma", type=float, default=2.0,
                   help="gradient backend smoothing (px)")
    d.add_argument("--tile-size", type=int, default=256,
                   help="tile size, 0 = no tiling")
    d.add_argument("--rotations", type=int, default=5)
    d.add_argument("--threshold", type=float, default=0.2)
    d.add_argument("--alpha", type=float, default=45.0)
    d.add_argument("--rays", type=int, default=360)
    d.add_argument("--smooth-thr", type=float, default=2.0)
    d.add_argument("--min-coverage", type=float, default=0.9)
    d.add_argument("--margin", type=int, default=50)
    d.add_argument("--target", type=int, default=1504,
                   help="working-frame size, 0 = keep input size")
    d.add_argument("--output", help="result JSON path (directory in batch mode)")
    d.add_argument("--overlay", help="write an overlay PNG here")
    d.add_argument("--debug-dir", help="dump probability map, mask and skeleton")
    d.add_argument("--jobs", type=int, default=1, help="parallel images")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("eval", help="score predicted rings against ground truth")
    e.add_argument("--pred", nargs="+", required=True)
    e.add_argument("--gt", nargs="+", required=True)
    e.add_argument("--mask", nargs="+", required=True)
    e.add_argument("--csv", help="write per-image metrics as CSV")
    e.add_argument("--json", help="write metrics as JSON")
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("overlay", help="draw a rings document onto an image")
    o.add_argument("--image", required=True)
    o.add_argument("--rings", required=True)
    o.add_argument("--output", required=True)
    o.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
