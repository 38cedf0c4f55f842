"""Reader/writer for the propforge dataset directory contract.

Frames arrive as L-mode PNGs with the ternary polarity coded as
{0, 127, 255}; labels as quantized heatmaps where pixel q decodes to
(q + 1) / 255.  Predictions are written back with the matching
floor(p * 255 - 0.5) quantization and ``{index:06}.pred.png`` names.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset


def decode_frame(arr: np.ndarray) -> np.ndarray:
    """{0, 127, 255} PNG values -> {-1, 0, +1} float32."""
    arr = np.asarray(arr)
    return np.where(arr > 191, 1.0,
                    np.where(arr < 64, -1.0, 0.0)).astype(np.float32)


def decode_label(arr: np.ndarray) -> np.ndarray:
    return ((np.asarray(arr, dtype=np.float32) + 1.0) / 255.0)


def encode_heatmap(h: np.ndarray) -> np.ndarray:
    """Inverse of decode_label's convention: floor(p * 255 - 0.5) in uint8."""
    h = np.asarray(h, dtype=np.float64)
    return np.clip(np.floor(h * 255.0 - 0.5), 0, 255).astype(np.uint8)


def sample_count(data_dir) -> int:
    manifest = json.loads((Path(data_dir) / "manifest.json").read_text())
    return int(manifest["count"])


def split_indices(count: int, val_frac: float = 0.1):
    """Deterministic split by index: first (1 - val_frac) train, rest val."""
    if not 0 < val_frac < 1:
        raise ValueError("val_frac must lie in (0, 1)")
    n_val = max(1, int(round(count * val_frac)))
    if n_val >= count:
        raise ValueError("not enough samples to split")
    cut = count - n_val
    return list(range(cut)), list(range(cut, count))


class FrameDataset(Dataset):
    """(frame, label) tensor pairs, each 1 x H x W."""

    def __init__(self, data_dir, indices=None):
        self.data_dir = Path(data_dir)
        if indices is None:
            indices = range(sample_count(self.data_dir))
        self.indices = list(indices)

    def __len__(self):
        return len(self.indices)

    def __getitem__(self, i):
        index = self.indices[i]
        base = self.data_dir / "samples" / f"{index:06}"
        with Image.open(f"{base}.frame.png") as im:
            frame = decode_frame(np.asarray(im.convert("L")))
        with Image.open(f"{base}.label.png") as im:
            label = decode_label(np.asarray(im.convert("L")))
        return (torch.from_numpy(frame).unsqueeze(0),
                torch.from_numpy(label).unsqueeze(0))


def write_prediction(out_dir, index: int, heatmap: np.ndarray) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{index:06}.pred.png"
    Image.fromarray(encode_heatmap(heatmap), mode="L").save(path)
    return path
