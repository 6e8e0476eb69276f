"""Command-line interface: prepare, train, export."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .config import TrainConfig, load_config, save_config


def _resolve_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for f in fields(TrainConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    if overrides:
        cfg = TrainConfig(**{**cfg.__dict__, **overrides})
    return cfg


def cmd_prepare(args) -> int:
    from .dataset import prepare

    cfg = _resolve_config(args)
    manifest = prepare(args.dataset, args.out, cfg)
    n_tiles = sum(d["n_tiles"] for d in manifest["discs"])
    print(f"prepared {len(manifest['discs'])} discs, {n_tiles} tiles -> {args.out}")
    save_config(cfg, Path(args.out) / "config.yaml")
    return 0


def cmd_train(args) -> int:
    from .dataset import load_prepared
    from .training import train

    cfg = _resolve_config(args)
    discs = load_prepared(args.data)

    def progress(epoch, train_loss, val_loss):
        print(f"epoch {epoch + 1}/{cfg.epochs}: train {train_loss:.4f} "
              f"val {val_loss:.4f}", flush=True)

    result = train(discs, cfg, progress=progress)
    result.save(args.out, cfg)
    save_config(cfg, Path(args.out).with_suffix(".yaml"))
    print(f"best epoch {result.best_epoch + 1} "
          f"(val {result.best_val_loss:.4f}) -> {args.out}")
    return 0


def cmd_export(args) -> int:
    from .onnx_export import export_model
    from .training import load_checkpoint

    model = load_checkpoint(args.checkpoint)
    export_model(model, args.output)
    print(f"exported {args.output}")
    if args.verify:
        from .verify import verify_against_detector
        mad = verify_against_detector(model, args.output, n_tiles=args.verify_tiles)
        print(f"parity vs detector runtime: mean abs diff {mad:.2e}")
        if mad > 1e-4:
            print("error: parity above 1e-4", file=sys.stderr)
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainkit",
        description="Training pipeline for the tree-ring boundary model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="tile an annotated dataset for training")
    p.add_argument("--dataset", required=True,
                   help="directory with images/, annotations/, masks/")
    p.add_argument("--out", required=True, help="output directory for tiles")
    p.add_argument("--config", help="YAML config")
    p.add_argument("--tile-size", type=int, dest="tile_size")
    p.add_argument("--thickness", type=int)
    p.add_argument("--target-size", type=int, dest="target_size")
    p.add_argument("--augment-fraction", type=float, dest="augment_fraction")
    p.add_argument("--augment-variants", type=int, dest="augment_variants")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_prepare)

    t = sub.add_parser("train", help="train the segmentation network")
    t.add_argument("--data", required=True, help="prepared tile directory")
    t.add_argument("--out", required=True, help="checkpoint output path (.pt)")
    t.add_argument("--config", help="YAML config")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int, dest="batch_size")
    t.add_argument("--seed", type=int)
    t.add_argument("--pretrained", action="store_const", const=True, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("export", help="export a checkpoint to ONNX")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--verify", action="store_true",
                   help="check parity through the detector CLI")
    e.add_argument("--verify-tiles", type=int, default=10)
    e.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
