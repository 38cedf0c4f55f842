"""Randomized multi-propeller event frames with Gaussian heatmap labels,
persisted as a deterministic, digest-verified on-disk dataset.

Layout: ``samples/{index:06}.frame.png`` (quantized ternary frame),
``samples/{index:06}.label.png`` (quantized heatmap),
``samples/{index:06}.meta.json`` and a top-level ``manifest.json`` with
SHA-256 digests of every file.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import events as ev
from . import geometry as geo

MANIFEST_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    width: int = 640
    height: int = 480
    n_props_min: int = 1
    n_props_max: int = 12
    r_px_min: float = 20.0
    r_px_max: float = 60.0
    blades_min: int = 2
    blades_max: int = 6
    rpm_min: float = 5000.0
    rpm_max: float = 40000.0
    tau_mean: float = 0.4
    tau_std: float = 0.08
    delta_t_ms: float = 5.0
    tilt_max_deg: float = 60.0
    fixed_tilt_deg: tuple = None        # pin (roll, pitch) deg, for sweeps
    p_n: float = 0.0
    p_b: float = 0.0
    sigma_factor: float = 0.25          # label sigma = sigma_factor * r_px
    background: str = "procedural"      # "procedural" or an image directory
    shapes: tuple = ("normal", "bullnose")
    margin_px: int = 4
    ensure_contrast: bool = True
    samples_per_spline: int = 48

    def validate(self):
        if self.n_props_min < 0 or self.n_props_max < self.n_props_min:
            raise ValueError("invalid propeller count range")
        if not (2 <= self.blades_min <= self.blades_max <= 6):
            raise ValueError("blade count range must lie in [2, 6]")
        if not (0 <= self.p_n <= 1 and 0 <= self.p_b <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.r_px_min <= 0 or self.r_px_max < self.r_px_min:
            raise ValueError("invalid r_px range")
        return self


@dataclass
class PropConfig:
    """One sampled propeller placement."""

    center: tuple
    r_px: float
    n_blades: int
    rpm: float
    theta_hb: float
    roll: float                 # camera-tilt roll (rad)
    pitch: float                # camera-tilt pitch (rad)
    color: int
    tau: float
    shape_preset: str


def sample_propeller_config(rng: np.random.Generator,
                            cfg: DatasetConfig) -> PropConfig:
    """Draw one propeller's randomized parameters (center left unplaced)."""
    tilt = math.radians(cfg.tilt_max_deg)
    roll = float(rng.uniform(-tilt, tilt))
    pitch = float(rng.uniform(-tilt, tilt))
    if cfg.fixed_tilt_deg is not None:
        roll, pitch = (math.radians(a) for a in cfg.fixed_tilt_deg)
    return PropConfig(
        center=(0.0, 0.0),
        r_px=float(rng.uniform(cfg.r_px_min, cfg.r_px_max)),
        n_blades=int(rng.integers(cfg.blades_min, cfg.blades_max + 1)),
        rpm=float(rng.uniform(cfg.rpm_min, cfg.rpm_max)),
        theta_hb=float(rng.uniform(0.0, 2.0 * math.pi)),
        roll=roll,
        pitch=pitch,
        color=int(rng.integers(0, 256)),
        tau=float(max(0.05, rng.normal(cfg.tau_mean, cfg.tau_std))),
        shape_preset=str(rng.choice(list(cfg.shapes))),
    )


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------

def make_label(centers, radii, sigma=None, width: int = 640,
               height: int = 480) -> np.ndarray:
    """Heatmap in [0, 1]: per pixel the max over per-center Gaussians
    exp(-d^2 / 2 sigma^2), zero beyond 3 sigma + r_px of every center."""
    heat = np.zeros((height, width), dtype=np.float64)
    if len(centers) == 0:
        return heat
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
    if sigma is None:
        sigmas = 0.25 * radii
    else:
        sigmas = np.broadcast_to(np.asarray(sigma, dtype=float), (len(centers),))
    ys = np.arange(height) + 0.0
    xs = np.arange(width) + 0.0
    for (cx, cy), r, s in zip(centers, radii, sigmas):
        if s <= 0:
            raise ValueError("sigma must be > 0")
        if not (0 <= cx < width and 0 <= cy < height):
            raise ValueError(f"center ({cx}, {cy}) outside image")
        cut = 3.0 * s + r
        x0, x1 = max(0, int(cx - cut)), min(width, int(cx + cut) + 2)
        y0, y1 = max(0, int(cy - cut)), min(height, int(cy + cut) + 2)
        d2 = ((xs[x0:x1] - cx)[None, :] ** 2 + (ys[y0:y1] - cy)[:, None] ** 2)
        blob = np.exp(-d2 / (2.0 * s * s))
        blob[d2 > cut * cut] = 0.0
        np.maximum(heat[y0:y1, x0:x1], blob, out=heat[y0:y1, x0:x1])
    return heat


def quantize_label(h: np.ndarray) -> np.ndarray:
    """floor(p * 255 - 0.5) clamped into [0, 255]."""
    h = np.asarray(h, dtype=np.float64)
    if h.min() < 0 or h.max() > 1:
        raise ValueError("heatmap values must lie in [0, 1]")
    return np.clip(np.floor(h * 255.0 - 0.5), 0, 255).astype(np.uint8)


def dequantize_label(img: np.ndarray) -> np.ndarray:
    """Approximate inverse of quantize_label (maps 254 back to 1.0)."""
    return (np.asarray(img, dtype=np.float64) + 1.0) / 255.0


# ---------------------------------------------------------------------------
# backgrounds
# ---------------------------------------------------------------------------

def procedural_background(rng: np.random.Generator, height: int,
                          width: int) -> np.ndarray:
    """Smooth low-frequency noise plus a few random filled polygons."""
    lo = rng.integers(4, 13)
    coarse = rng.uniform(0, 255, (lo, lo))
    yi = np.linspace(0, lo - 1, height)
    xi = np.linspace(0, lo - 1, width)
    y0 = np.floor(yi).astype(int)
    x0 = np.floor(xi).astype(int)
    y1 = np.minimum(y0 + 1, lo - 1)
    x1 = np.minimum(x0 + 1, lo - 1)
    fy = (yi - y0)[:, None]
    fx = (xi - x0)[None, :]
    img = (coarse[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
           + coarse[np.ix_(y1, x0)] * fy * (1 - fx)
           + coarse[np.ix_(y0, x1)] * (1 - fy) * fx
           + coarse[np.ix_(y1, x1)] * fy * fx)
    for _ in range(rng.integers(1, 5)):
        n = rng.integers(3, 7)
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        rad = rng.uniform(0.05, 0.4) * min(width, height)
        ang = np.sort(rng.uniform(0, 2 * math.pi, n))
        poly = np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)])
        mask = np.zeros((height, width), bool)
        geo.fill_polygon(mask, poly)
        img[mask] = rng.uniform(0, 255)
    img += rng.normal(0, 6, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def _background_files(directory: str) -> list:
    exts = {".png", ".jpg", ".jpeg", ".bmp"}
    files = sorted(p for p in Path(directory).iterdir()
                   if p.suffix.lower() in exts)
    if not files:
        raise FileNotFoundError(f"no background images in {directory}")
    return files


def background_patch(rng: np.random.Generator, cfg: DatasetConfig,
                     height: int, width: int) -> np.ndarray:
    if cfg.background == "procedural":
        return procedural_background(rng, height, width)
    files = _background_files(cfg.background)
    path = files[int(rng.integers(0, len(files)))]
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    if arr.shape[0] < height or arr.shape[1] < width:
        arr = np.asarray(Image.fromarray(arr).resize(
            (max(width, arr.shape[1]), max(height, arr.shape[0]))))
    y = int(rng.integers(0, arr.shape[0] - height + 1))
    x = int(rng.integers(0, arr.shape[1] - width + 1))
    return arr[y:y + height, x:x + width].copy()


# ---------------------------------------------------------------------------
# frame composition
# ---------------------------------------------------------------------------

def _pick_color(rng, patch, tau, cfg):
    """Random silhouette gray; re-drawn until it contrasts with the patch
    so the propeller actually fires events (bounded retries)."""
    med = float(np.clip(np.median(patch), 1, 255))
    for _ in range(20):
        color = int(rng.integers(0, 256))
        if not cfg.ensure_contrast:
            return color
        if abs(math.log(max(color, 1)) - math.log(med)) >= tau + 0.1:
            return color
    return 255 if med < 128 else 0


def compose_frame(rng: np.random.Generator, cfg: DatasetConfig):
    """One labeled sample: frame (ternary int8), heatmap label, metadata."""
    cfg.validate()
    n_target = int(rng.integers(cfg.n_props_min, cfg.n_props_max + 1))
    frame = np.zeros((cfg.height, cfg.width), dtype=np.int8)
    prop_mask = np.zeros_like(frame, dtype=bool)
    placed = []          # (PropConfig, half-size)
    metas = []

    for _ in range(n_target):
        prop = sample_propeller_config(rng, cfg)
        half = prop.r_px + cfg.margin_px
        spot = None
        for _attempt in range(40):
            cx = float(rng.uniform(half, cfg.width - half))
            cy = float(rng.uniform(half, cfg.height - half))
            # axis-aligned patch squares must not overlap
            if all(max(abs(cx - px), abs(cy - py)) >= half + ph
                   for (px, py), ph in placed):
                spot = (cx, cy)
                break
        if spot is None:
            continue
        cx, cy = spot
        prop.center = (cx, cy)
        placed.append(((cx, cy), half))

        size = int(math.ceil(2 * half))
        px0 = min(max(0, int(round(cx - size / 2))), cfg.width - size)
        py0 = min(max(0, int(round(cy - size / 2))), cfg.height - size)
        patch_bg = background_patch(rng, cfg, size, size)
        color = _pick_color(rng, patch_bg, prop.tau, cfg)
        prop.color = color

        shape = geo.preset_shape(prop.shape_preset)
        scale = prop.r_px / shape.nominal_radius_px
        local_center = (cx - px0, cy - py0)
        H = geo.place_homography(local_center, prop.roll, prop.pitch)
        dtheta = prop.rpm * ev.RPM_TO_RAD_S * cfg.delta_t_ms * 1e-3
        masks = []
        for theta in (prop.theta_hb, prop.theta_hb + dtheta):
            contours = geo.propeller_outline(shape, prop.n_blades, theta,
                                             cfg.samples_per_spline)
            masks.append(geo.silhouette_mask(contours, size, size, H, scale))
        i_t, i_dt = patch_bg.copy(), patch_bg.copy()
        i_t[masks[0]] = color
        i_dt[masks[1]] = color
        cloud = ev.trigger_events(i_t, i_dt, prop.tau)
        patch_frame = ev.event_frame(cloud)
        sil = masks[0] | masks[1]

        frame[py0:py0 + size, px0:px0 + size] = patch_frame
        prop_mask[py0:py0 + size, px0:px0 + size] |= sil
        metas.append({
            "center": [cx, cy],
            "r_px": prop.r_px,
            "n_blades": prop.n_blades,
            "rpm": prop.rpm,
            "theta_hb_rad": prop.theta_hb,
            "homography": [float(v) for v in H.reshape(-1)],
            "color": color,
            "tau": prop.tau,
            "aliased": bool(dtheta >= 2 * math.pi / prop.n_blades),
            "tilt_deg": [math.degrees(prop.roll), math.degrees(prop.pitch)],
        })

    if cfg.p_n > 0 or cfg.p_b > 0:
        corr_seed = int(rng.integers(0, 2 ** 63 - 1))
        frame = ev.corrupt(frame, prop_mask,
                           ev.CorruptionConfig(cfg.p_n, cfg.p_b, corr_seed))

    centers = [m["center"] for m in metas]
    radii = [m["r_px"] for m in metas]
    sigmas = [cfg.sigma_factor * r for r in radii]
    label = make_label(centers, radii, sigmas, cfg.width, cfg.height)
    meta = {
        "width": cfg.width,
        "height": cfg.height,
        "delta_t_ms": cfg.delta_t_ms,
        "p_n": cfg.p_n,
        "p_b": cfg.p_b,
        "propellers": metas,
    }
    return frame, label, meta


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Isolated per-sample RNG stream; independent of worker scheduling."""
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def _render_sample(seed: int, index: int, cfg: DatasetConfig):
    rng = sample_rng(seed, index)
    frame, label, meta = compose_frame(rng, cfg)
    meta = {"index": index, "seed": seed, **meta}
    return {
        f"samples/{index:06}.frame.png": _png_bytes(ev.quantize_frame(frame)),
        f"samples/{index:06}.label.png": _png_bytes(quantize_label(label)),
        f"samples/{index:06}.meta.json": _json_bytes(meta),
    }


def _write_sample(args):
    seed, index, cfg, outdir = args
    files = _render_sample(seed, index, cfg)
    digests = {}
    for rel, data in files.items():
        path = Path(outdir) / rel
        path.write_bytes(data)
        digests[rel] = hashlib.sha256(data).hexdigest()
    return index, digests


def worker_count(requested=None) -> int:
    env = os.environ.get("PROPFORGE_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    if requested:
        cap = min(cap, requested)
    return max(1, cap)


def generate_dataset(count: int, seed: int, outdir, cfg: DatasetConfig = None,
                     workers: int = None) -> dict:
    """Generate ``count`` samples and a digest manifest.  Fully determined
    by (seed, count, cfg); independent of the worker count."""
    cfg = (cfg or DatasetConfig()).validate()
    outdir = Path(outdir)
    (outdir / "samples").mkdir(parents=True, exist_ok=True)
    jobs = [(seed, i, cfg, str(outdir)) for i in range(count)]
    results = {}
    n_workers = worker_count(workers)
    if n_workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for index, digests in pool.map(_write_sample, jobs, chunksize=4):
                results[index] = digests
    else:
        for job in jobs:
            index, digests = _write_sample(job)
            results[index] = digests
    samples = []
    for i in range(count):
        d = results[i]
        samples.append({
            "index": i,
            "files": {rel.split(".", 1)[1].rsplit(".", 1)[0]: rel
                      for rel in sorted(d)},
            "sha256": {rel: d[rel] for rel in sorted(d)},
        })
    manifest = {
        "version": MANIFEST_VERSION,
        "seed": seed,
        "count": count,
        "config": asdict(cfg),
        "samples": samples,
    }
    (outdir / "manifest.json").write_bytes(_json_bytes(manifest))
    return manifest


def load_manifest(dataset_dir) -> dict:
    return json.loads((Path(dataset_dir) / "manifest.json").read_text())


def verify_dataset(dataset_dir) -> list:
    """Re-hash every sample file; returns the list of mismatched paths."""
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir)
    bad = []
    for sample in manifest["samples"]:
        for rel, digest in sample["sha256"].items():
            path = dataset_dir / rel
            if not path.exists():
                bad.append(rel)
                continue
            if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
                bad.append(rel)
    return bad


def load_sample(dataset_dir, index: int):
    """(ternary frame, label heatmap in [0,1], meta dict) for one sample."""
    dataset_dir = Path(dataset_dir)
    base = dataset_dir / "samples" / f"{index:06}"
    with Image.open(f"{base}.frame.png") as im:
        frame = ev.dequantize_frame(np.asarray(im))
    with Image.open(f"{base}.label.png") as im:
        label = dequantize_label(np.asarray(im))
    meta = json.loads(Path(f"{base}.meta.json").read_text())
    return frame, label, meta
