"""End-to-end gate for the trainer: dataset and evaluation both go through
the propforge command line; the trainer only sees the directory contract."""

import json
import subprocess
import sys
import time

from propforge_trainer import TrainConfig, train, infer_dir
from propforge_trainer.data import sample_count, split_indices


def check(name, cond, detail=""):
    line = f"[{'PASS' if cond else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert cond, line


def propforge(*args):
    return subprocess.run([sys.executable, "-m", "propforge.cli", *args],
                          check=True, capture_output=True, text=True)


def test_trainer_acceptance(tmp_path):
    t0 = time.monotonic()
    data = tmp_path / "data"
    propforge("generate", "--count", "500", "--seed", "21",
              "--out", str(data),
              "--set", "width=128", "--set", "height=128",
              "--set", "r_px_min=30", "--set", "r_px_max=50",
              "--set", "n_props_min=1", "--set", "n_props_max=2",
              "--set", "tilt_max_deg=30")

    model, history = train(TrainConfig(data_dir=str(data)))
    loss_ok = history[-1] <= 0.5 * history[0]

    _, val = split_indices(sample_count(data))
    preds = tmp_path / "preds"
    paths = infer_dir(model, data, preds, indices=val)
    files_ok = (len(paths) == len(val)
                and [p.name for p in paths]
                == [f"{i:06}.pred.png" for i in val])

    out = tmp_path / "eval"
    propforge("sweep", "--detector", "heatmap-dir",
              "--dataset", str(data), "--heatmaps", str(preds),
              "--out", str(out))
    rows = json.loads((out / "sweep.json").read_text())
    cells = [r for r in rows if r["param"] == "r_px" and r["n_samples"]]
    n = sum(r["n_samples"] for r in cells)
    dr = sum(r["dr"] * r["n_samples"] for r in cells) / n
    dr_ok = dr >= 0.60

    dt = time.monotonic() - t0
    check("trainer: 5 epochs on 500 samples halve the loss, validation "
          "DR >= 60% through the propforge evaluation, one prediction "
          "per sample, under 30 min",
          loss_ok and files_ok and dr_ok and dt < 1800.0,
          f"loss {history[0]:.4f}->{history[-1]:.4f} "
          f"DR={100 * dr:.1f}% on {n} props t={dt:.0f}s")
