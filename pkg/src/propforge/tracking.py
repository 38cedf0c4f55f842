"""Constant-velocity Kalman tracking of propeller detections.

State is [x, y, vx, vy] in pixels and pixels/s. Tracks are matched to
detections with greedy nearest-neighbour association under a gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class TrackState:
    x: np.ndarray                 # (4,) [x, y, vx, vy]
    P: np.ndarray                 # (4, 4) covariance
    track_id: int = 0
    age: int = 0                  # updates received
    misses: int = 0               # consecutive frames without a detection

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(4)
        self.P = np.asarray(self.P, dtype=float).reshape(4, 4)

    @property
    def position(self):
        return (float(self.x[0]), float(self.x[1]))

    @property
    def velocity(self):
        return (float(self.x[2]), float(self.x[3]))


def new_track(xy, track_id: int = 0, pos_var: float = 1e4,
              vel_var: float = 1e6) -> TrackState:
    """Fresh track at a detection, velocity unknown.

    The large initial variances let the first few updates dominate the
    prior, so a noise-free measurement stream converges essentially
    exactly."""
    x = np.array([xy[0], xy[1], 0.0, 0.0])
    P = np.diag([pos_var, pos_var, vel_var, vel_var])
    return TrackState(x=x, P=P, track_id=track_id)


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def process_noise(dt: float, q: float) -> np.ndarray:
    """White-acceleration process noise with spectral density q."""
    q11 = dt ** 4 / 4 * q
    q13 = dt ** 3 / 2 * q
    q33 = dt ** 2 * q
    Q = np.zeros((4, 4))
    Q[0, 0] = Q[1, 1] = q11
    Q[0, 2] = Q[2, 0] = Q[1, 3] = Q[3, 1] = q13
    Q[2, 2] = Q[3, 3] = q33
    return Q


H = np.zeros((2, 4))
H[0, 0] = H[1, 1] = 1.0


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def kf_predict(track: TrackState, dt: float, q: float = 0.0) -> TrackState:
    if dt < 0:
        raise ValueError("dt must be >= 0")
    F = transition(dt)
    x = F @ track.x
    P = _symmetrize(F @ track.P @ F.T + process_noise(dt, q))
    return replace(track, x=x, P=P)


def kf_update(track: TrackState, z, r: float = 1.0) -> TrackState:
    """Measurement update with isotropic position noise variance r."""
    z = np.asarray(z, dtype=float).reshape(2)
    R = np.eye(2) * r
    S = H @ track.P @ H.T + R
    K = track.P @ H.T @ np.linalg.solve(S, np.eye(2))
    x = track.x + K @ (z - H @ track.x)
    ImKH = np.eye(4) - K @ H
    # Joseph form keeps P positive semidefinite under roundoff
    P = _symmetrize(ImKH @ track.P @ ImKH.T + K @ R @ K.T)
    return replace(track, x=x, P=P, age=track.age + 1, misses=0)


def associate(tracks, detections, gate_px: float = 40.0):
    """Greedy nearest-neighbour association.

    Returns (pairs, unmatched_tracks, unmatched_detections) where pairs
    is a list of (track_index, detection_index). Candidates beyond
    gate_px are never matched; distance ties break on lower indices."""
    cand = []
    for ti, t in enumerate(tracks):
        tx, ty = t.position
        for di, d in enumerate(detections):
            dist = math.hypot(d[0] - tx, d[1] - ty)
            if dist <= gate_px:
                cand.append((dist, ti, di))
    cand.sort(key=lambda c: (c[0], c[1], c[2]))
    pairs = []
    used_t, used_d = set(), set()
    for dist, ti, di in cand:
        if ti in used_t or di in used_d:
            continue
        pairs.append((ti, di))
        used_t.add(ti)
        used_d.add(di)
    unmatched_t = [i for i in range(len(tracks)) if i not in used_t]
    unmatched_d = [i for i in range(len(detections)) if i not in used_d]
    return pairs, unmatched_t, unmatched_d


@dataclass
class Tracker:
    """Multi-target tracker over detection streams."""
    dt: float = 1.0 / 15.0
    q: float = 50.0
    r: float = 4.0
    gate_px: float = 40.0
    max_misses: int = 5
    tracks: list = field(default_factory=list)
    _next_id: int = 0

    def step(self, detections):
        """Advance one frame with a list of (x, y) detections."""
        self.tracks = [kf_predict(t, self.dt, self.q) for t in self.tracks]
        pairs, unmatched_t, unmatched_d = associate(
            self.tracks, detections, self.gate_px)
        for ti, di in pairs:
            self.tracks[ti] = kf_update(self.tracks[ti], detections[di], self.r)
        for ti in unmatched_t:
            t = self.tracks[ti]
            self.tracks[ti] = replace(t, misses=t.misses + 1)
        self.tracks = [t for t in self.tracks if t.misses <= self.max_misses]
        for di in unmatched_d:
            self.tracks.append(new_track(detections[di], self._next_id))
            self._next_id += 1
        return self.tracks


def drone_estimate(points):
    """Centroid and area of the polygon spanned by propeller centers.

    Points are sorted by angle around their centroid before applying the
    shoelace formula, so detection order does not matter. With fewer than
    3 points the area is 0 and the centroid is the plain mean."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("need at least one point")
    mean = pts.mean(axis=0)
    if len(pts) < 3:
        return (float(mean[0]), float(mean[1])), 0.0
    order = np.argsort(np.arctan2(pts[:, 1] - mean[1], pts[:, 0] - mean[0]))
    p = pts[order]
    x, y = p[:, 0], p[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = float(abs(cross.sum()) / 2.0)
    if area < 1e-12:
        return (float(mean[0]), float(mean[1])), 0.0
    cx = float(((x + np.roll(x, -1)) * cross).sum() / (3.0 * cross.sum()))
    cy = float(((y + np.roll(y, -1)) * cross).sum() / (3.0 * cross.sum()))
    # shoelace centroid sign follows the winding; area is unsigned
    return (cx, cy), area
