"""Training configuration, serialized as YAML."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import yaml


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    schedule: str = "cosine"
    loss: str = "dice"
    optimizer: str = "adam"
    encoder: str = "resnet18"
    pretrained: bool = False  # ImageNet weights need a download; enable when online
    batch_size: int = 8
    tile_size: int = 256
    thickness: int = 3
    target_size: int = 1504
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    augment_fraction: float = 0.5
    augment_variants: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if abs(sum(self.split) - 1.0) > 1e-6:
            raise ValueError(f"split must sum to 1, got {self.split}")


def load_config(path) -> TrainConfig:
    doc = yaml.safe_load(Path(path).read_text()) or {}
    if "split" in doc:
        doc["split"] = tuple(doc["split"])
    return TrainConfig(**doc)


def save_config(cfg: TrainConfig, path) -> None:
    doc = asdict(cfg)
    doc["split"] = list(doc["split"])
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=True))
