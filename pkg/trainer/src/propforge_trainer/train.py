"""Seed-deterministic training loop: Adam on the mean squared error
between the sigmoid heatmap and the decoded label."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch.utils.data import DataLoader

from .data import FrameDataset, sample_count, split_indices
from .model import NetConfig, build_model


@dataclass
class TrainConfig:
    data_dir: str = ""
    epochs: int = 5
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    val_frac: float = 0.1
    net: NetConfig = field(default_factory=NetConfig)

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs/batch_size/lr must be positive")
        return self


def train(cfg: TrainConfig, log=print):
    """Returns (model, history) with one mean training loss per epoch."""
    cfg.validate()
    torch.manual_seed(cfg.seed)
    model = build_model(cfg.net, seed=cfg.seed)
    train_idx, _ = split_indices(sample_count(cfg.data_dir), cfg.val_frac)
    loader = DataLoader(
        FrameDataset(cfg.data_dir, train_idx),
        batch_size=cfg.batch_size, shuffle=True, num_workers=0,
        generator=torch.Generator().manual_seed(cfg.seed))
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = torch.nn.MSELoss()
    history = []
    model.train()
    for epoch in range(cfg.epochs):
        total, n = 0.0, 0
        for x, y in loader:
            opt.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(x)
            n += len(x)
        history.append(total / n)
        if log:
            log(f"epoch {epoch + 1}/{cfg.epochs}  loss {history[-1]:.6f}")
    model.eval()
    return model, history
