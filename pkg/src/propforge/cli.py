"""Command-line surface: generate, sweep, analyze, simulate, verify."""

from __future__ import annotations

import functools
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import config as cfgmod
from . import dataset as ds
from . import evaluate as ev
from . import plots
from . import sim as simmod


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    """Map ConfigError to usage exit 2, other failures to exit 1."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except cfgmod.ConfigError as e:
            _fail(str(e), 2)
        except (OSError, ValueError) as e:
            _fail(str(e), 1)
    return wrapper


@click.group()
def main():
    """Synthetic event-camera propeller datasets, detector metrics, and
    closed-loop flight simulations."""


GENERATE_DEFAULTS = {
    "width": 640, "height": 480,
    "n_props_min": 1, "n_props_max": 12,
    "r_px_min": 20.0, "r_px_max": 60.0,
    "blades_min": 2, "blades_max": 6,
    "rpm_min": 5000.0, "rpm_max": 40000.0,
    "tau_mean": 0.4, "tau_std": 0.08,
    "delta_t_ms": 5.0, "tilt_max_deg": 60.0,
    "p_n": 0.0, "p_b": 0.0,
    "sigma_factor": 0.25,
    "background": "procedural",
    "workers": 0,
}


@main.command()
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--backgrounds", type=str, default=None,
              help="Background mode or image directory.")
@guarded
def generate(count, seed, out, config_path, overrides, backgrounds):
    """Render a labeled event-frame dataset with a manifest."""
    if count < 0:
        raise cfgmod.ConfigError("count must be >= 0")
    cfg = cfgmod.resolve(GENERATE_DEFAULTS, config_path, overrides)
    if backgrounds is not None:
        cfg["background"] = backgrounds
    workers = cfg.pop("workers") or None
    dcfg = ds.DatasetConfig(**cfg)
    cfgmod.echo({"command": "generate", "count": count, "seed": seed,
                 "workers": workers or 0, **cfg}, out)
    manifest = ds.generate_dataset(count, seed, out, dcfg, workers=workers)
    path = Path(out) / "manifest.json"
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    click.echo(f"manifest: {path}")
    click.echo(f"digest: {digest}")
    click.echo(f"samples: {manifest['count']}")


SWEEP_DEFAULTS = {
    "n_samples": 50, "width": 160, "height": 160, "theta_c": 0.5,
    "iou_threshold": 0.5,
}


@main.command()
@click.option("--detector", type=click.Choice(["oracle", "baseline",
                                               "heatmap-dir"]),
              default="oracle", show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True),
              help="Dataset directory (heatmap-dir mode).")
@click.option("--heatmaps", "heatmap_dir", type=click.Path(exists=True),
              help="Predicted heatmap directory (heatmap-dir mode).")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@guarded
def sweep(detector, out, seed, dataset_dir, heatmap_dir, config_path,
          overrides):
    """Detection-rate tables across radius, blades, RPM, noise and tilt."""
    cfg = cfgmod.resolve(SWEEP_DEFAULTS, config_path, overrides)
    cfgmod.echo({"command": "sweep", "detector": detector, "seed": seed,
                 **cfg}, out)
    spec = ev.SweepSpec(n_samples=cfg["n_samples"], width=cfg["width"],
                        height=cfg["height"], theta_c=cfg["theta_c"],
                        iou_threshold=cfg["iou_threshold"])
    if detector == "heatmap-dir":
        if not dataset_dir or not heatmap_dir:
            raise cfgmod.ConfigError(
                "heatmap-dir mode needs --dataset and --heatmaps")
        rows, missing = ev.sweep_heatmap_dir(dataset_dir, heatmap_dir,
                                             spec, theta_c=cfg["theta_c"])
        if missing:
            click.echo(f"warning: {len(missing)} samples without "
                       f"predictions: {missing[:10]}", err=True)
    else:
        fn = ev.oracle_detector if detector == "oracle" else ev.baseline_detector
        rows = ev.run_sweep(spec, fn, seed=seed)
    csv_path = ev.write_sweep(rows, out)
    fig_path = plots.plot_sweep(rows, Path(out) / "sweep.png")
    click.echo(f"table: {csv_path}")
    click.echo(f"figure: {fig_path}")


def _parse_drone(text: str) -> ev.DroneGeometry:
    fields = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        fields[key.strip()] = float(val)
    try:
        return ev.DroneGeometry(S=fields["S"], N_prop=int(fields["N"]),
                                r=fields["r"], r_m=fields["rm"])
    except KeyError as e:
        raise cfgmod.ConfigError(f"--drone needs S=,N=,r=,rm= (missing {e})")


@main.command()
@click.option("--dr", type=float, default=0.851, show_default=True,
              help="Single-propeller detection rate for the drone table.")
@click.option("--drone", "drones", multiple=True, metavar="S=,N=,r=,rm=",
              help="Extra drone geometry to analyze.")
@click.option("--out", type=click.Path(), default=None)
@guarded
def analyze(dr, drones, out):
    """Visible-area ratios for reference drones and drone-level DR."""
    rows = [(name, geom, ev.area_ratio(geom), reported)
            for name, geom, reported in ev.REFERENCE_DRONES]
    for text in drones:
        geom = _parse_drone(text)
        rows.append((f"custom(S={geom.S:g})", geom, ev.area_ratio(geom), None))
    click.echo(f"{'drone':<16}{'A_ratio':>10}{'reported':>10}")
    for name, geom, ratio, reported in rows:
        rep = f"{reported:.1f}" if reported is not None else "-"
        click.echo(f"{name:<16}{ratio:>10.1f}{rep:>10}")
    click.echo("")
    click.echo(f"drone detection rate at DR={dr:g}")
    click.echo(f"{'eta':<6}{'DR_D':>10}")
    etas = (1, 2, 3, 4)
    for eta in etas:
        click.echo(f"{eta:<6}{100 * ev.drone_dr(dr, eta):>9.2f}%")
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        lines = ["drone,a_ratio,reported"]
        for name, geom, ratio, reported in rows:
            lines.append(f"{name},{ratio:.4f},"
                         f"{'' if reported is None else reported}")
        (outdir / "area_ratio.csv").write_text("\n".join(lines) + "\n")
        lines = ["eta,drone_dr"]
        for eta in etas:
            lines.append(f"{eta},{ev.drone_dr(dr, eta):.6f}")
        (outdir / "drone_dr.csv").write_text("\n".join(lines) + "\n")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 3.5))
        xs = np.linspace(0, 1, 101)
        for eta in etas:
            ax.plot(xs, [100 * ev.drone_dr(x, eta) for x in xs],
                    label=f"eta={eta}")
        ax.set_xlabel("propeller DR")
        ax.set_ylabel("drone DR (%)")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(outdir / "drone_dr.png", dpi=120)
        plt.close(fig)
        click.echo(f"wrote: {outdir}")


SIM_DEFAULTS = {"noise": 1.0, "workers": 0}


@main.command()
@click.option("--mode", type=click.Choice(["follow", "land"]), required=True)
@click.option("--episodes", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", type=float, default=1.0, show_default=True,
              help="Noise scale; 0 disables detector noise and disturbance.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--workers", type=int, default=None)
@guarded
def simulate(mode, episodes, seed, noise, out, workers):
    """Run seeded closed-loop episodes and report the success rate."""
    if episodes < 1:
        raise cfgmod.ConfigError("episodes must be >= 1")
    if noise < 0:
        raise cfgmod.ConfigError("noise must be >= 0")
    base = (simmod.follow_scenario if mode == "follow"
            else simmod.land_scenario)(noisy=noise > 0)
    if noise > 0 and noise != 1.0:
        det = replace(base.detector,
                      sigma_px=base.detector.sigma_px * noise,
                      dropout=min(1.0, base.detector.dropout * noise))
        dist = replace(base.disturbance,
                       chaser_sigma=base.disturbance.chaser_sigma * noise,
                       target_sigma=base.disturbance.target_sigma * noise)
        base = replace(base, detector=det, disturbance=dist)
    outdir = Path(out)
    cfgmod.echo({"command": "simulate", "mode": mode, "episodes": episodes,
                 "seed": seed, "noise": noise}, outdir)
    batch = simmod.run_batch(base, mode, episodes, seed=seed, workers=workers)
    first = simmod.simulate(
        base, mode,
        seed=int(np.random.SeedSequence((seed, 0)).generate_state(1)[0]))
    (outdir / "episode_000.json").write_text(
        json.dumps(first.trajectory, separators=(",", ":")) + "\n")
    plots.episode_error_csv(first.trajectory, outdir / "error_vs_time.csv")
    plots.plot_episode(first.trajectory, outdir / "error_vs_time.png", mode)
    summary = dict(batch)
    blob = json.dumps(summary, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(blob.encode()).hexdigest()
    (outdir / "summary.json").write_text(blob + "\n")
    click.echo(f"success rate: {batch['success_rate']:.2f} "
               f"({episodes} episodes)")
    click.echo(f"summary digest: {digest}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True),
              required=True)
@guarded
def verify(dataset_dir):
    """Re-hash every dataset file against the manifest."""
    mismatches = ds.verify_dataset(dataset_dir)
    if mismatches:
        for name in mismatches:
            click.echo(f"mismatch: {name}", err=True)
        sys.exit(1)
    click.echo("ok")


if __name__ == "__main__":
    main()
