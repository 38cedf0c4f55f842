"""Command-line surface: train a heatmap network, run inference."""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click
import torch

from .data import sample_count, split_indices
from .model import NetConfig, build_model, count_params
from .train import TrainConfig, train as run_train
from .infer import infer_dir


@click.group()
def main():
    """Toy event-frame to propeller-heatmap trainer."""


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True),
              required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=5, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--batch", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--base", type=int, default=16, show_default=True)
@click.option("--stages", type=int, default=2, show_default=True)
@click.option("--blocks", type=int, default=2, show_default=True)
@click.option("--val-frac", type=float, default=0.1, show_default=True)
def train(data_dir, out, epochs, lr, batch, seed, base, stages, blocks,
          val_frac):
    """Train on a dataset directory; writes model.pt and loss.csv."""
    net = NetConfig(base=base, stages=stages, blocks=blocks)
    cfg = TrainConfig(data_dir=data_dir, epochs=epochs, lr=lr,
                      batch_size=batch, seed=seed, val_frac=val_frac, net=net)
    try:
        model, history = run_train(cfg, log=click.echo)
    except (OSError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    torch.save({"net": asdict(net), "state": model.state_dict()},
               outdir / "model.pt")
    with open(outdir / "loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        writer.writerows((i + 1, f"{v:.8f}") for i, v in enumerate(history))
    (outdir / "train_config.json").write_text(
        json.dumps({**asdict(cfg), "params": count_params(model)},
                   sort_keys=True, indent=2) + "\n")
    click.echo(f"model: {outdir / 'model.pt'} ({count_params(model)} params)")


def load_model(path):
    blob = torch.load(path, map_location="cpu", weights_only=True)
    model = build_model(NetConfig(**blob["net"]))
    model.load_state_dict(blob["state"])
    model.eval()
    return model


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True),
              required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["all", "train", "val"]),
              default="all", show_default=True)
@click.option("--val-frac", type=float, default=0.1, show_default=True)
@click.option("--batch", type=int, default=16, show_default=True)
def infer(model_path, data_dir, out, split, val_frac, batch):
    """Write {index:06}.pred.png heatmaps for the chosen split."""
    try:
        model = load_model(model_path)
        indices = None
        if split != "all":
            tr, val = split_indices(sample_count(data_dir), val_frac)
            indices = tr if split == "train" else val
        paths = infer_dir(model, data_dir, out, indices=indices,
                          batch_size=batch)
    except (OSError, ValueError, RuntimeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(paths)} predictions to {out}")


if __name__ == "__main__":
    main()
