"""Batch inference writing quantized prediction heatmaps next to nothing
else: one ``{index:06}.pred.png`` per requested sample."""

from __future__ import annotations

import torch
from torch.utils.data import DataLoader

from .data import FrameDataset, sample_count, write_prediction


def infer_dir(model, data_dir, out_dir, indices=None, batch_size: int = 16):
    """Run the model over the dataset and persist predictions; returns the
    written paths in index order."""
    if indices is None:
        indices = list(range(sample_count(data_dir)))
    indices = list(indices)
    dataset = FrameDataset(data_dir, indices)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False,
                        num_workers=0)
    model.eval()
    paths = []
    cursor = 0
    with torch.no_grad():
        for x, _ in loader:
            pred = model(x).squeeze(1).numpy()
            for row in pred:
                paths.append(write_prediction(out_dir, indices[cursor], row))
                cursor += 1
    return paths
