"""Cross-runtime parity: compare torch inference with the detector's runtime.

The exported model is driven through the detector CLI (its external
interface): `detect --tile-size 0 --rotations 1 --target 0` leaves the
probability map exactly equal to the backend output, which the CLI dumps in
the PMAP debug format.
"""

from __future__ import annotations

import shutil
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
from PIL import Image


def _detector_cli() -> list[str]:
    exe = shutil.which("treering")
    if exe:
        return [exe]
    return [sys.executable, "-m", "treering.cli"]


def _read_pmap(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != b"PMAP":
        raise ValueError(f"{path}: not a PMAP file")
    w, h = struct.unpack("<II", data[4:12])
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w)


def verify_against_detector(model, onnx_path, n_tiles: int = 10,
                            tile_size: int = 64, seed: int = 0) -> float:
    """Mean abs difference between torch and the detector runtime on random tiles."""
    rng = np.random.default_rng(seed)
    model = model.eval()
    cli = _detector_cli()
    diffs = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for i in range(n_tiles):
            tile = rng.integers(0, 256, (tile_size, tile_size, 3), dtype=np.uint8)
            tile_path = tmp / f"tile_{i}.png"
            Image.fromarray(tile).save(tile_path)
            dbg = tmp / f"dbg_{i}"
            cmd = cli + ["detect", "--image", str(tile_path),
                         "--backend", "neural", "--model", str(onnx_path),
                         "--tile-size", "0", "--rotations", "1", "--target", "0",
                         "--pith-x", str(tile_size // 2),
                         "--pith-y", str(tile_size // 2),
                         "--output", str(tmp / f"rings_{i}.json"),
                         "--debug-dir", str(dbg)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            if proc.returncode != 0:
                raise RuntimeError(
                    f"detector CLI failed (exit {proc.returncode}): {proc.stderr}")
            got = _read_pmap(dbg / f"tile_{i}_probability.pmap")
            x = torch.from_numpy(tile).permute(2, 0, 1).float()[None] / 255.0
            with torch.no_grad():
                want = torch.sigmoid(model(x))[0, 0].numpy()
            diffs.append(float(np.abs(got - want).mean()))
    return float(np.mean(diffs))
