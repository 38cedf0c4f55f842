"""Event-camera simulation: log-intensity thresholding of image pairs of
rotating propellers, ternary event frames, corruption and Int8 quantization.

Intensities are clamped to [1, 255] before the log so a zero gray level
cannot blow up the threshold test (real sensors have a finite dynamic
range).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo

RPM_TO_RAD_S = 2.0 * math.pi / 60.0


@dataclass
class EventSynthConfig:
    tau_mean: float = 0.4
    tau_std: float = 0.0
    delta_t_ms: float = 5.0
    rpm: float = 10000.0
    micro_steps: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.tau_mean <= 0:
            raise ValueError("tau_mean must be > 0")
        if not 0 < self.delta_t_ms <= 20:
            raise ValueError("delta_t_ms must be in (0, 20]")
        if self.micro_steps < 1:
            raise ValueError("micro_steps must be >= 1")

    @property
    def omega(self) -> float:
        """Rotational speed in rad/s."""
        return self.rpm * RPM_TO_RAD_S

    @property
    def delta_theta(self) -> float:
        """Blade rotation over one integration window, rad."""
        return self.omega * self.delta_t_ms * 1e-3


@dataclass
class EventCloud:
    """Sparse event list: pixel coords, timestamps (us) and polarities."""

    xy: np.ndarray          # (N, 2) int columns x, y
    t: np.ndarray           # (N,) float us in [0, delta_t]
    polarity: np.ndarray    # (N,) int8, values in {-1, +1}
    width: int
    height: int

    def __len__(self):
        return len(self.t)

    def sorted_by_time(self) -> "EventCloud":
        order = np.argsort(self.t, kind="stable")
        return EventCloud(self.xy[order], self.t[order], self.polarity[order],
                          self.width, self.height)


@dataclass
class CorruptionConfig:
    p_n: float = 0.0        # per-pixel noise probability
    p_b: float = 0.0        # per-propeller-pixel miss probability
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p_n <= 1 or not 0 <= self.p_b <= 1:
            raise ValueError("probabilities must lie in [0, 1]")


@dataclass
class PropScene:
    """One propeller over a static background patch, ready to render."""

    background: np.ndarray          # uint8 HxW
    shape: geo.SplineBladeShape
    n_blades: int
    color: int
    homography: np.ndarray          # local px -> canvas px
    scale: float = 1.0
    samples_per_spline: int = 64


def render_frame(scene: PropScene, theta: float) -> np.ndarray:
    contours = geo.propeller_outline(scene.shape, scene.n_blades, theta,
                                     scene.samples_per_spline)
    return geo.rasterize(contours, scene.color, scene.background,
                         scene.homography, scene.scale)


def render_pair(scene: PropScene, theta_hb: float, delta_theta: float):
    """Two gray images differing only in the propeller rotation angle."""
    return render_frame(scene, theta_hb), render_frame(scene, theta_hb + delta_theta)


def silhouette(scene: PropScene, theta: float) -> np.ndarray:
    contours = geo.propeller_outline(scene.shape, scene.n_blades, theta,
                                     scene.samples_per_spline)
    h, w = scene.background.shape
    return geo.silhouette_mask(contours, h, w, scene.homography, scene.scale)


def _log_image(img: np.ndarray) -> np.ndarray:
    return np.log(np.clip(img.astype(np.float64), 1.0, 255.0))


def trigger_events(i_t: np.ndarray, i_dt: np.ndarray, tau: float,
                   t_us: float = 0.0) -> EventCloud:
    """Events where |log I_t - log I_{t+dt}| >= tau.

    Polarity is sgn(log I_t - log I_{t+dt}).
    """
    if i_t.shape != i_dt.shape:
        raise ValueError("image dimensions do not match")
    diff = _log_image(i_t) - _log_image(i_dt)
    ys, xs = np.nonzero(np.abs(diff) >= tau)
    pol = np.sign(diff[ys, xs]).astype(np.int8)
    xy = np.column_stack([xs, ys]).astype(np.int32)
    t = np.full(len(xs), float(t_us))
    return EventCloud(xy, t, pol, width=i_t.shape[1], height=i_t.shape[0])


def merge_clouds(clouds, width: int, height: int) -> EventCloud:
    if not clouds:
        return EventCloud(np.zeros((0, 2), np.int32), np.zeros(0),
                          np.zeros(0, np.int8), width, height)
    return EventCloud(
        np.vstack([c.xy for c in clouds]),
        np.concatenate([c.t for c in clouds]),
        np.concatenate([c.polarity for c in clouds]),
        width, height,
    ).sorted_by_time()


def event_frame(cloud: EventCloud) -> np.ndarray:
    """Ternary frame: per pixel, sign of the time-averaged polarity."""
    acc = np.zeros((cloud.height, cloud.width), dtype=np.int32)
    if len(cloud):
        np.add.at(acc, (cloud.xy[:, 1], cloud.xy[:, 0]), cloud.polarity)
    return np.sign(acc).astype(np.int8)


def event_cloud_sweep(scene: PropScene, config: EventSynthConfig,
                      theta_hb: float = 0.0) -> EventCloud:
    """Spatio-temporal cloud: the window is split into micro-pairs whose
    events get the mid-step timestamp, tracing the rotation helix."""
    m = config.micro_steps
    if m < 1:
        raise ValueError("micro_steps must be >= 1")
    dt_us = config.delta_t_ms * 1e3
    dth = config.delta_theta / m
    clouds = []
    for j in range(m):
        a = theta_hb + j * dth
        i_t, i_dt = render_pair(scene, a, dth)
        clouds.append(trigger_events(i_t, i_dt, config.tau_mean,
                                     t_us=(j + 0.5) * dt_us / m))
    h, w = scene.background.shape
    return merge_clouds(clouds, w, h)


def corrupt(frame: np.ndarray, mask: np.ndarray, cfg: CorruptionConfig) -> np.ndarray:
    """Blank propeller pixels with probability p_b, then flip random pixels
    to +/-1 (equally likely) with probability p_n.  Deterministic per seed."""
    if mask is not None and mask.shape != frame.shape:
        raise ValueError("mask dimensions do not match")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed))
    out = frame.copy()
    if cfg.p_b > 0 and mask is not None:
        drop = rng.random(frame.shape) < cfg.p_b
        out[drop & mask] = 0
    if cfg.p_n > 0:
        hit = rng.random(frame.shape) < cfg.p_n
        signs = rng.integers(0, 2, size=frame.shape, dtype=np.int8) * 2 - 1
        out[hit] = signs[hit]
    return out


_QUANT = np.array([0, 127, 255], dtype=np.uint8)       # for values -1, 0, +1


def quantize_frame(frame: np.ndarray) -> np.ndarray:
    """Exact ternary mapping -1 -> 0, 0 -> 127, +1 -> 255
    (clamp(E*255 + 127 | 0, 255))."""
    f = np.asarray(frame)
    if not np.isin(f, (-1, 0, 1)).all():
        raise ValueError("frame is not ternary")
    return _QUANT[f.astype(np.int16) + 1]


def dequantize_frame(img: np.ndarray) -> np.ndarray:
    """Inverse lookup of quantize_frame."""
    img = np.asarray(img)
    if not np.isin(img, (0, 127, 255)).all():
        raise ValueError("image is not a quantized ternary frame")
    out = np.zeros(img.shape, dtype=np.int8)
    out[img == 0] = -1
    out[img == 255] = 1
    return out
