"""Heatmap-to-detection conversion, detection-rate metrics, Table-style
parameter sweeps, and the propeller/fiducial visible-area analysis."""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import dataset as ds
from . import events as ev

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


# ---------------------------------------------------------------------------
# detections and metrics
# ---------------------------------------------------------------------------

@dataclass
class Detection:
    center: tuple           # (x, y) px
    bbox_side: float        # square box side, 2 * r_px estimate
    confidence: float

    @property
    def bbox(self):
        h = self.bbox_side / 2.0
        return (self.center[0] - h, self.center[1] - h,
                self.center[0] + h, self.center[1] + h)


@dataclass
class GroundTruth:
    center: tuple
    bbox_side: float

    @property
    def bbox(self):
        h = self.bbox_side / 2.0
        return (self.center[0] - h, self.center[1] - h,
                self.center[0] + h, self.center[1] + h)


def heatmap_to_detections(h: np.ndarray, theta_c: float = 0.5,
                          r_px_hint: float = None) -> list:
    """Threshold at theta_c, 8-connected components, value-weighted centroid.

    Without a hint the box side comes from the component's radius of
    gyration (side = 2 * 2 * rg, clipped to [40, 240] px); with a hint the
    side is 2 * r_px_hint.
    """
    h = np.asarray(h, dtype=float)
    mask = h >= theta_c
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    out = []
    for comp in range(1, n + 1):
        ys, xs = np.nonzero(labels == comp)
        w = h[ys, xs]
        tot = w.sum()
        cx = float((xs * w).sum() / tot)
        cy = float((ys * w).sum() / tot)
        if r_px_hint is not None:
            side = 2.0 * r_px_hint
        else:
            rg = math.sqrt(float((((xs - cx) ** 2 + (ys - cy) ** 2) * w).sum() / tot))
            side = min(max(2.0 * (2.0 * rg), 2 * 20.0), 2 * 120.0)
        out.append(Detection(center=(cx, cy), bbox_side=side,
                             confidence=float(w.max())))
    return out


def iou(a, b) -> float:
    """Intersection over union of two (x0, y0, x1, y1) boxes."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    area_a = max(0.0, ax1 - ax0) * max(0.0, ay1 - ay0)
    area_b = max(0.0, bx1 - bx0) * max(0.0, by1 - by0)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def success(g: GroundTruth, d: Detection) -> bool:
    """Successful detection: IoU >= 0.5 (inclusive)."""
    return iou(g.bbox, d.bbox) >= 0.5


def detection_rate(results) -> float:
    results = list(results)
    if not results:
        raise ValueError("empty result list")
    return sum(bool(r) for r in results) / len(results)


def drone_dr(dr: float, eta: int) -> float:
    """Drone detection rate: 1 - (1 - DR)^eta for eta required propellers."""
    if not 0 <= dr <= 1:
        raise ValueError("DR must lie in [0, 1]")
    if eta < 1:
        raise ValueError("eta must be >= 1")
    return 1.0 - (1.0 - dr) ** eta


def size_from_truths(detections, truths):
    """Resize each detection box to 2 * r of the nearest ground truth.

    Used when evaluating center quality with known propeller radii: the
    truth whose center is closest supplies the box side (truth bbox_side
    is already 2 * r_px)."""
    if not truths:
        return list(detections)
    out = []
    for d in detections:
        near = min(truths, key=lambda g: (g.center[0] - d.center[0]) ** 2
                   + (g.center[1] - d.center[1]) ** 2)
        out.append(replace(d, bbox_side=near.bbox_side))
    return out


def match_detections(truths, detections, iou_threshold: float = 0.5):
    """One-to-one greedy matching by descending IoU; returns per-truth
    success booleans."""
    pairs = []
    for gi, g in enumerate(truths):
        for di, d in enumerate(detections):
            v = iou(g.bbox, d.bbox)
            if v >= iou_threshold:
                pairs.append((v, gi, di))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    hit = [False] * len(truths)
    used = set()
    for v, gi, di in pairs:
        if hit[gi] or di in used:
            continue
        hit[gi] = True
        used.add(di)
    return hit


# ---------------------------------------------------------------------------
# area analysis
# ---------------------------------------------------------------------------

@dataclass
class DroneGeometry:
    """Simplified multirotor for the visible-area analysis.  Lengths in mm."""

    S: float                # diagonal motor-to-motor length
    N_prop: int
    r: float                # propeller radius
    r_m: float              # motor radius

    def __post_init__(self):
        if not 2 * self.r < self.S:
            raise ValueError("propellers overlap the airframe: need 2r < S")
        if not self.r_m < self.r:
            raise ValueError("motor radius must be < propeller radius")

    @property
    def gamma(self) -> float:
        return 2.0 * math.asin(self.r_m / self.r)


def prop_area(r: float, r_m: float) -> float:
    """Visible area of one propeller disc occluded by its motor and arm."""
    if r_m >= r:
        raise ValueError("motor radius must be < propeller radius")
    gamma = 2.0 * math.asin(r_m / r)
    return (r * r * (math.pi - gamma / 2.0)
            - math.pi * r_m * r_m / 2.0
            - r_m * r * math.cos(gamma / 2.0))


def area_ratio(g: DroneGeometry) -> float:
    """Visible propeller area over the largest centered fiducial's area."""
    gamma = g.gamma
    num = 4.0 * g.N_prop * (g.r * g.r * (2.0 * math.pi - gamma)
                            - math.pi * g.r_m * g.r_m
                            - 2.0 * g.r_m * g.r * math.cos(gamma / 2.0))
    return num / (g.S - 2.0 * g.r) ** 2


REFERENCE_DRONES = [
    ("DJI Phantom 4", DroneGeometry(S=350, N_prop=4, r=119.4, r_m=12.0), 109.8),
    ("QAV 210 X", DroneGeometry(S=210, N_prop=4, r=63.5, r_m=14.0), 51.2),
    ("DJI Inspire 2", DroneGeometry(S=603, N_prop=4, r=190.0, r_m=18.5), 69.2),
]


# ---------------------------------------------------------------------------
# parameter sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    """Per-axis parameter grids; unswept axes randomize over their grid,
    except the camera angles (held at 0 for the non-angle axes) and the
    corruption probabilities (held at 0 for the angle axes)."""

    r_px: tuple = (20, 30, 40, 50, 60)
    n_blades: tuple = (2, 3, 4, 5, 6)
    rpm: tuple = (5000, 10000, 20000, 30000, 40000)
    p_n: tuple = (0.0, 0.01, 0.02)
    p_b: tuple = (0.0, 0.15, 0.3, 0.45, 0.6)
    phi_deg: tuple = (0, 10, 20, 30, 60)
    theta_deg: tuple = (0, 10, 20, 30, 60)
    n_samples: int = 50
    width: int = 160
    height: int = 160
    theta_c: float = 0.5
    iou_threshold: float = 0.5

    def axes(self):
        return {
            "r_px": self.r_px,
            "n_blades": self.n_blades,
            "rpm": self.rpm,
            "p_n": self.p_n,
            "p_b": self.p_b,
            "phi_deg": self.phi_deg,
            "theta_deg": self.theta_deg,
        }

    def validate(self):
        if any(len(v) == 0 for v in self.axes().values()):
            raise ValueError("sweep grids must be non-empty")
        return self


ANGLE_AXES = ("phi_deg", "theta_deg")


def _cell_config(spec: SweepSpec, axis: str, value, rng: np.random.Generator):
    """Single-propeller dataset config for one sweep cell sample."""

    def pick(name, grid):
        if name == axis:
            return value
        return grid[int(rng.integers(0, len(grid)))]

    if axis in ANGLE_AXES:
        p_n, p_b = 0.0, 0.0
    else:
        p_n = pick("p_n", spec.p_n)
        p_b = pick("p_b", spec.p_b)
    if axis in ANGLE_AXES:
        phi = pick("phi_deg", spec.phi_deg)
        theta = pick("theta_deg", spec.theta_deg)
    else:
        phi, theta = 0.0, 0.0
    r_px = pick("r_px", spec.r_px)
    margin = 4
    size = max(spec.width, spec.height, int(2 * (r_px + margin)) + 2)
    return {
        "width": size,
        "height": size,
        "r_px": float(r_px),
        "n_blades": int(pick("n_blades", spec.n_blades)),
        "rpm": float(pick("rpm", spec.rpm)),
        "p_n": float(p_n),
        "p_b": float(p_b),
        "phi_deg": float(phi),
        "theta_deg": float(theta),
    }


def oracle_detector(frame: np.ndarray, meta: dict):
    """Reads the metadata; one exact detection per propeller that left any
    events inside its disc (no events -> no detection)."""
    dets = []
    h, w = frame.shape
    ys, xs = np.nonzero(frame)
    for prop in meta["propellers"]:
        cx, cy = prop["center"]
        r = prop["r_px"]
        if len(xs):
            inside = ((xs - cx) ** 2 + (ys - cy) ** 2) <= r * r
            fired = bool(inside.any())
        else:
            fired = False
        if fired:
            dets.append(Detection(center=(cx, cy), bbox_side=2 * r,
                                  confidence=1.0))
    return dets


def baseline_detector(frame: np.ndarray, meta: dict = None,
                      theta_c: float = 0.35):
    """Training-free blob detector: smoothed event density as a heatmap."""
    density = ndimage.gaussian_filter(np.abs(frame).astype(float), sigma=6.0)
    peak = density.max()
    if peak <= 0:
        return []
    return heatmap_to_detections(density / peak, theta_c=theta_c)


def run_sweep(spec: SweepSpec, detector, seed: int = 0,
              base_cfg: ds.DatasetConfig = None) -> list:
    """DR per grid cell, one axis varied at a time (Table-style layout).

    ``detector`` maps (frame, meta) -> list of Detection.  Returns rows of
    dicts: {param, value, dr, n_samples}.
    """
    spec.validate()
    base_cfg = base_cfg or ds.DatasetConfig()
    rows = []
    for axis, grid in spec.axes().items():
        for value in grid:
            results = []
            for s in range(spec.n_samples):
                rng = np.random.default_rng(np.random.SeedSequence(
                    (seed, zlib.crc32(axis.encode()),
                     int(round(float(value) * 1000)), s)))
                cell = _cell_config(spec, axis, value, rng)
                cfg = replace(
                    base_cfg,
                    width=cell["width"], height=cell["height"],
                    n_props_min=1, n_props_max=1,
                    r_px_min=cell["r_px"], r_px_max=cell["r_px"],
                    blades_min=cell["n_blades"], blades_max=cell["n_blades"],
                    rpm_min=cell["rpm"], rpm_max=cell["rpm"],
                    p_n=cell["p_n"], p_b=cell["p_b"],
                    tilt_max_deg=0.0,
                    fixed_tilt_deg=(cell["phi_deg"], cell["theta_deg"]),
                )
                try:
                    frame, label, meta = ds.compose_frame(rng, cfg)
                    dets = detector(frame, meta)
                except Exception:          # per-cell failures are recorded
                    results.append(False)
                    continue
                truths = [GroundTruth(center=tuple(p["center"]),
                                      bbox_side=2 * p["r_px"])
                          for p in meta["propellers"]]
                results.extend(match_detections(truths, dets,
                                                spec.iou_threshold))
            rows.append({
                "param": axis,
                "value": value,
                "dr": detection_rate(results) if results else float("nan"),
                "n_samples": len(results),
            })
    return rows


def write_sweep(rows, outdir, stem: str = "sweep"):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["param", "value", "dr",
                                                "n_samples"])
        writer.writeheader()
        writer.writerows(rows)
    (outdir / f"{stem}.json").write_text(json.dumps(rows, indent=2) + "\n")
    return csv_path


# ---------------------------------------------------------------------------
# external heatmap evaluation (bridge to the trained network)
# ---------------------------------------------------------------------------

def load_prediction(heatmap_dir, index: int) -> np.ndarray:
    path = Path(heatmap_dir) / f"{index:06}.pred.png"
    if not path.exists():
        raise FileNotFoundError(path)
    with Image.open(path) as im:
        return ds.dequantize_label(np.asarray(im.convert("L")))


def evaluate_heatmap_dir(dataset_dir, heatmap_dir, theta_c: float = 0.5,
                         iou_threshold: float = 0.5, indices=None) -> dict:
    """DR of externally produced heatmaps against the dataset's metadata."""
    manifest = ds.load_manifest(dataset_dir)
    indices = list(indices) if indices is not None else [
        s["index"] for s in manifest["samples"]]
    results = []
    missing = []
    for index in indices:
        _, _, meta = ds.load_sample(dataset_dir, index)
        try:
            pred = load_prediction(heatmap_dir, index)
        except FileNotFoundError:
            missing.append(index)
            continue
        truths = [GroundTruth(center=tuple(p["center"]),
                              bbox_side=2 * p["r_px"])
                  for p in meta["propellers"]]
        dets = size_from_truths(
            heatmap_to_detections(pred, theta_c=theta_c), truths)
        results.extend(match_detections(truths, dets, iou_threshold))
    dr = detection_rate(results) if results else float("nan")
    return {"dr": dr, "n_propellers": len(results), "missing": missing}


def sweep_heatmap_dir(dataset_dir, heatmap_dir, spec: SweepSpec = None,
                      theta_c: float = 0.5) -> list:
    """Table-shaped DR rows for external heatmaps, bucketing each propeller
    by its metadata parameters (nearest grid value per axis)."""
    spec = (spec or SweepSpec()).validate()
    manifest = ds.load_manifest(dataset_dir)
    buckets = {(axis, v): [] for axis, grid in spec.axes().items()
               for v in grid}
    missing = []
    for sample in manifest["samples"]:
        index = sample["index"]
        _, _, meta = ds.load_sample(dataset_dir, index)
        try:
            pred = load_prediction(heatmap_dir, index)
        except FileNotFoundError:
            missing.append(index)
            continue
        props = meta["propellers"]
        truths = [GroundTruth(center=tuple(p["center"]), bbox_side=2 * p["r_px"])
                  for p in props]
        dets = size_from_truths(
            heatmap_to_detections(pred, theta_c=theta_c), truths)
        hits = match_detections(truths, dets, spec.iou_threshold)
        for p, hit in zip(props, hits):
            values = {
                "r_px": p["r_px"],
                "n_blades": p["n_blades"],
                "rpm": p["rpm"],
                "p_n": meta["p_n"],
                "p_b": meta["p_b"],
                "phi_deg": p.get("tilt_deg", [0, 0])[0],
                "theta_deg": p.get("tilt_deg", [0, 0])[1],
            }
            for axis, grid in spec.axes().items():
                v = min(grid, key=lambda g_: abs(g_ - abs(values[axis])))
                buckets[(axis, v)].append(hit)
    rows = []
    for axis, grid in spec.axes().items():
        for v in grid:
            cell = buckets[(axis, v)]
            rows.append({
                "param": axis,
                "value": v,
                "dr": detection_rate(cell) if cell else float("nan"),
                "n_samples": len(cell),
            })
    return rows, missing
