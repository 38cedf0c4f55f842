"""Matplotlib figures for sweep and simulation outputs.

Figures are rendered headless (Agg) next to the CSV files the CLI
writes, one PNG per report.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


AXIS_LABELS = {
    "r_px": "propeller radius (px)",
    "n_blades": "blade count",
    "rpm": "RPM",
    "p_n": "noise fraction",
    "p_b": "blank fraction",
    "phi_deg": "roll tilt (deg)",
    "theta_deg": "pitch tilt (deg)",
}


def plot_sweep(rows, path) -> Path:
    """Detection rate vs each swept parameter, one subplot per axis."""
    path = Path(path)
    axes_names = []
    for row in rows:
        if row["param"] not in axes_names:
            axes_names.append(row["param"])
    if not axes_names:
        raise ValueError("no sweep rows to plot")
    n = len(axes_names)
    ncols = min(4, n)
    nrows = (n + ncols - 1) // ncols
    fig, axs = plt.subplots(nrows, ncols, figsize=(4 * ncols, 3 * nrows),
                            squeeze=False)
    for i, name in enumerate(axes_names):
        ax = axs[i // ncols][i % ncols]
        pts = [(row["value"], row["dr"]) for row in rows
               if row["param"] == name and row["n_samples"] > 0]
        if pts:
            xs, ys = zip(*sorted(pts))
            ax.plot(xs, [y * 100 for y in ys], marker="o")
        ax.set_xlabel(AXIS_LABELS.get(name, name))
        ax.set_ylabel("DR (%)")
        ax.set_ylim(-2, 102)
        ax.grid(True, alpha=0.3)
    for j in range(n, nrows * ncols):
        axs[j // ncols][j % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_episode(trajectory, path, mode: str = "follow") -> Path:
    """Centroid error and phase over time for one episode."""
    path = Path(path)
    ts = [s["t"] for s in trajectory]
    errs = [s["err_px"] for s in trajectory]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ts, [e if e is not None else float("nan") for e in errs])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("centroid error (px)")
    ax.set_title(f"{mode} episode")
    ax.grid(True, alpha=0.3)
    if mode == "land":
        phases = [s["phase"] for s in trajectory]
        seen = []
        for t, ph in zip(ts, phases):
            if not seen or ph != seen[-1][1]:
                seen.append((t, ph))
        for t, ph in seen[1:]:
            ax.axvline(t, color="gray", linestyle=":", alpha=0.6)
            ax.text(t, ax.get_ylim()[1] * 0.95, ph, fontsize=7, rotation=90,
                    va="top")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def episode_error_csv(trajectory, path) -> Path:
    """CSV of centroid error vs time, the plotter's data companion."""
    path = Path(path)
    lines = ["t,err_px,phase"]
    for s in trajectory:
        err = "" if s["err_px"] is None else s["err_px"]
        lines.append(f"{s['t']},{err},{s['phase']}")
    path.write_text("\n".join(lines) + "\n")
    return path
