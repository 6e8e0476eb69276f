"""Training loop: Dice loss, Adam with cosine annealing, best-val selection."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from .config import TrainConfig
from .model import RingSegmentationNet, dice_loss


class TileDataset(Dataset):
    def __init__(self, discs: list[dict]):
        self.images = np.concatenate([d["images"] for d in discs]) if discs \
            else np.zeros((0, 1, 1, 3), np.uint8)
        self.targets = np.concatenate([d["targets"] for d in discs]) if discs \
            else np.zeros((0, 1, 1), np.uint8)

    def __len__(self):
        return self.images.shape[0]

    def __getitem__(self, idx):
        img = torch.from_numpy(self.images[idx]).permute(2, 0, 1).float() / 255.0
        tgt = torch.from_numpy(self.targets[idx]).unsqueeze(0).float()
        return img, tgt


def split_discs(discs: list[dict], split=(0.6, 0.2, 0.2), seed: int = 0):
    """Deterministic per-disc train/val/test split (never an empty train set)."""
    order = list(np.random.default_rng(seed).permutation(len(discs)))
    n = len(discs)
    n_train = max(1, round(split[0] * n))
    n_val = round(split[1] * n)
    if n_train + n_val > n:
        n_val = n - n_train
    train = [discs[i] for i in order[:n_train]]
    val = [discs[i] for i in order[n_train:n_train + n_val]]
    test = [discs[i] for i in order[n_train + n_val:]]
    return train, val, test


@dataclass
class TrainResult:
    model: RingSegmentationNet
    best_epoch: int
    best_val_loss: float
    history: dict = field(default_factory=dict)

    def save(self, path, cfg: TrainConfig | None = None) -> None:
        torch.save({"state_dict": self.model.state_dict(),
                    "best_epoch": self.best_epoch,
                    "best_val_loss": self.best_val_loss,
                    "history": self.history,
                    "config": cfg.__dict__ if cfg else None}, path)


def load_checkpoint(path) -> RingSegmentationNet:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = RingSegmentationNet(pretrained=False)
    model.load_state_dict(payload["state_dict"])
    return model.eval()


def _epoch_loss(model, loader, optimizer=None) -> float:
    losses = []
    for img, tgt in loader:
        logits = model(img)
        loss = dice_loss(logits, tgt)
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        losses.append(float(loss.detach()))
    return float(np.mean(losses)) if losses else float("nan")


def train(discs: list[dict], cfg: TrainConfig,
          progress=None) -> TrainResult:
    """Train on prepared disc tiles; returns the lowest-validation-loss model.

    Without enough discs for a validation split, the final epoch is kept.
    """
    if not discs:
        raise ValueError("train: empty dataset")
    torch.manual_seed(cfg.seed)
    train_discs, val_discs, _ = split_discs(discs, cfg.split, cfg.seed)
    if not any(d["images"].shape[0] for d in train_discs):
        raise ValueError("train: training split has no tiles")
    gen = torch.Generator().manual_seed(cfg.seed)
    train_loader = DataLoader(TileDataset(train_discs), batch_size=cfg.batch_size,
                              shuffle=True, generator=gen)
    val_loader = DataLoader(TileDataset(val_discs), batch_size=cfg.batch_size) \
        if val_discs else None

    model = RingSegmentationNet(pretrained=cfg.pretrained)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer,
                                                           T_max=cfg.epochs)
    history = {"train": [], "val": [], "lr": []}
    best_val = float("inf")
    best_epoch = -1
    best_state = None
    for epoch in range(cfg.epochs):
        model.train()
        train_loss = _epoch_loss(model, train_loader, optimizer)
        model.eval()
        with torch.no_grad():
            val_loss = _epoch_loss(model, val_loader) if val_loader else train_loss
        history["train"].append(train_loss)
        history["val"].append(val_loss)
        history["lr"].append(optimizer.param_groups[0]["lr"])
        scheduler.step()
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
        if progress is not None:
            progress(epoch, train_loss, val_loss)
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model=model, best_epoch=best_epoch,
                       best_val_loss=best_val, history=history)
