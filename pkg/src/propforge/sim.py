"""Closed-loop point-mass simulation of the follow and land maneuvers.

Two vehicles in millimetres: a chaser carrying the camera and a target
drone whose propeller centers are what the detector sees. The chaser is
a planar-plus-altitude point mass with a first-order command lag and
velocity damping; no attitude dynamics. The detector projects the true
propeller centers through a pinhole model and corrupts them with
Gaussian pixel noise and dropouts. Detections feed the Kalman tracker,
the polygon estimator, and the PID policies.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import control as ct
from . import tracking as tr


@dataclass
class DetectorModel:
    sigma_px: float = 0.0       # Gaussian noise on each detected center
    dropout: float = 0.0        # per-propeller miss probability


@dataclass
class DisturbanceModel:
    """Random-walk accelerations in mm/s^2 per sqrt(s).

    chaser_sigma shakes the chaser laterally. target_sigma moves the
    followed target. ground_gain scales chaser shake up as the gap to
    the pad closes (downwash): sigma * (1 + gain * (1 - alt/alt0))."""
    chaser_sigma: float = 0.0
    target_sigma: float = 0.0
    ground_gain: float = 0.0


@dataclass
class SimScenario:
    control_period: float = 1.0 / 15.0
    episode_s: float = 10.0
    f_px: float = 320.0
    width: int = 640
    height: int = 480
    prop_half_side_mm: float = 123.7    # quad, 350 mm diagonal motor span
    pad_radius_mm: float = 135.0
    lateral_tol_mm: float = 30.0
    alt_ref_mm: float = 320.0           # error normalization altitude
    accel_lat: float = 4000.0           # mm/s^2 at full command
    accel_fwd: float = 2500.0
    lag_tau: float = 0.15
    damping: float = 1.5                # 1/s on velocity
    final_rate: float = 400.0           # mm/s descent once committed
    tracker_q: float = 50.0
    tracker_r: float = 1.0
    tracker_gate: float = 80.0
    n_miss: int = 10
    touchdown_mm: float = 20.0
    commit_mm: float = 170.0    # below this the descent never aborts
                                # (the pad fills and then exits the FOV)
    chaser_start: tuple = (0.0, 0.0, 0.0)
    target_start: tuple = (1500.0, 100.0, -80.0)
    detector: DetectorModel = field(default_factory=DetectorModel)
    disturbance: DisturbanceModel = field(default_factory=DisturbanceModel)

    def __post_init__(self):
        if self.control_period <= 0:
            raise ValueError("control period must be > 0")
        if self.episode_s <= 0:
            raise ValueError("episode length must be > 0")


def follow_scenario(noisy: bool = False) -> SimScenario:
    det = DetectorModel(sigma_px=1.0, dropout=0.05) if noisy else DetectorModel()
    dist = DisturbanceModel(target_sigma=900.0) if noisy else DisturbanceModel()
    return SimScenario(episode_s=10.0, detector=det, disturbance=dist)


def land_scenario(noisy: bool = False) -> SimScenario:
    det = DetectorModel(sigma_px=1.0, dropout=0.05) if noisy else DetectorModel()
    dist = (DisturbanceModel(chaser_sigma=20.0, ground_gain=1.0)
            if noisy else DisturbanceModel())
    return SimScenario(episode_s=25.0,
                       chaser_start=(150.0, -100.0, 1500.0),
                       target_start=(0.0, 0.0, 0.0),
                       detector=det, disturbance=dist)


# --- projection ---------------------------------------------------------

QUAD_CORNERS = np.array([(1, 1), (1, -1), (-1, -1), (-1, 1)], dtype=float)


def follow_prop_points(target_pos, half_side):
    """Propeller centers of the target quad in its Y-Z plane (camera
    looks along +X)."""
    pts = np.tile(np.asarray(target_pos, dtype=float), (4, 1))
    pts[:, 1] += QUAD_CORNERS[:, 0] * half_side
    pts[:, 2] += QUAD_CORNERS[:, 1] * half_side
    return pts


def land_prop_points(target_pos, half_side):
    """Propeller centers of the pad quad in the X-Y plane (camera looks
    down)."""
    pts = np.tile(np.asarray(target_pos, dtype=float), (4, 1))
    pts[:, 0] += QUAD_CORNERS[:, 0] * half_side
    pts[:, 1] += QUAD_CORNERS[:, 1] * half_side
    return pts


def project_forward(points, chaser_pos, sc: SimScenario):
    """Pinhole projection of world points into the forward camera.

    Image x grows with world +Y, image y grows with world -Z. Points at
    or behind the camera plane are dropped."""
    out = []
    cx, cy = sc.width / 2.0, sc.height / 2.0
    for q in np.atleast_2d(points):
        rel = np.asarray(q, dtype=float) - chaser_pos
        if rel[0] <= 1.0:
            continue
        u = cx + sc.f_px * rel[1] / rel[0]
        v = cy - sc.f_px * rel[2] / rel[0]
        out.append((u, v))
    return out


def project_down(points, chaser_pos, sc: SimScenario):
    """Projection into the downward camera: image x from +X, image y
    from +Y, depth is the altitude gap."""
    out = []
    cx, cy = sc.width / 2.0, sc.height / 2.0
    for q in np.atleast_2d(points):
        rel = np.asarray(q, dtype=float) - chaser_pos
        depth = -rel[2]
        if depth <= 1.0:
            continue
        u = cx + sc.f_px * rel[0] / depth
        v = cy + sc.f_px * rel[1] / depth
        out.append((u, v))
    return out


def in_fov(px, sc: SimScenario) -> bool:
    return 0 <= px[0] < sc.width and 0 <= px[1] < sc.height


def detect(pixels, model: DetectorModel, sc: SimScenario, rng):
    """Apply dropout and pixel noise; detections outside the frame are
    lost."""
    out = []
    for p in pixels:
        if model.dropout > 0 and rng.random() < model.dropout:
            continue
        q = (p[0] + (rng.normal(0, model.sigma_px) if model.sigma_px else 0.0),
             p[1] + (rng.normal(0, model.sigma_px) if model.sigma_px else 0.0))
        if in_fov(q, sc):
            out.append(q)
    return out


# --- vehicle ------------------------------------------------------------

@dataclass
class PointMass:
    pos: np.ndarray
    vel: np.ndarray = None
    acc: np.ndarray = None

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float).copy()
        if self.vel is None:
            self.vel = np.zeros(3)
        if self.acc is None:
            self.acc = np.zeros(3)

    def step(self, a_cmd, dt, tau, damping, extra_acc=None):
        a_cmd = np.asarray(a_cmd, dtype=float)
        self.acc += (a_cmd - self.acc) * min(1.0, dt / tau)
        a = self.acc.copy()
        if extra_acc is not None:
            a = a + extra_acc
        self.vel += (a - damping * self.vel) * dt
        self.pos += self.vel * dt


# --- episodes -----------------------------------------------------------

@dataclass
class EpisodeResult:
    success: bool
    mode: str
    seed: int
    touchdown_error_mm: float = None
    terminal_err_px: float = None
    phase: str = None
    steps: int = 0
    trajectory: list = field(default_factory=list)

    def digest(self) -> str:
        body = {
            "success": self.success, "mode": self.mode, "seed": self.seed,
            "touchdown_error_mm": _round(self.touchdown_error_mm),
            "terminal_err_px": _round(self.terminal_err_px),
            "phase": self.phase, "steps": self.steps,
            "trajectory": self.trajectory,
        }
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _round(x, nd=6):
    if x is None:
        return None
    return round(float(x), nd)


def _log_step(traj, t, chaser, target, dets, tracks, phase, cmd, err_px):
    traj.append({
        "t": _round(t),
        "chaser": [_round(v) for v in chaser.pos],
        "target": [_round(v) for v in target],
        "detections": [[_round(a, 3), _round(b, 3)] for a, b in dets],
        "tracks": [[_round(p[0], 3), _round(p[1], 3)]
                   for p in (tk.position for tk in tracks)],
        "phase": phase,
        "cmd": [_round(c) for c in cmd],
        "err_px": _round(err_px),
    })


def _confident_tracks(tracker, min_age=2):
    return [t for t in tracker.tracks if t.age >= min_age]


def run_follow(sc: SimScenario, seed: int = 0, log: bool = True) -> EpisodeResult:
    rng = np.random.default_rng(np.random.SeedSequence((seed,)))
    dt = sc.control_period
    n_steps = int(round(sc.episode_s / dt))
    chaser = PointMass(np.array(sc.chaser_start))
    target = PointMass(np.array(sc.target_start))
    gains = ct.FollowGains()
    tracker = tr.Tracker(dt=dt, q=sc.tracker_q, r=sc.tracker_r,
                         gate_px=sc.tracker_gate)
    cx, cy = sc.width / 2.0, sc.height / 2.0
    area_ref = None
    walk = np.zeros(3)
    misses = 0
    worst_miss = 0
    traj = []
    err_px = float("inf")
    for k in range(n_steps):
        props = follow_prop_points(target.pos, sc.prop_half_side_mm)
        pixels = project_forward(props, chaser.pos, sc)
        dets = detect(pixels, sc.detector, sc, rng)
        tracker.step(dets)
        conf = _confident_tracks(tracker)
        cmd = (0.0, 0.0, 0.0)
        phase = "LOCK" if len(conf) >= 3 else "SEARCH"
        if conf:
            (ux, uy), area = tr.drone_estimate([t.position for t in conf])
            if len(conf) < 3:
                area = None
            elif area_ref is None:
                area_ref = area
            err_px = math.hypot(ux - cx, uy - cy)
            u_r, u_p, u_t = ct.follow_policy(gains, (ux, uy), (cx, cy), dt,
                                             area=area,
                                             area_ref=area_ref)
            cmd = (u_r, u_p, u_t)
            a_cmd = np.array([sc.accel_fwd * u_t,
                              sc.accel_lat * u_r,
                              -sc.accel_lat * u_p])
        else:
            a_cmd = np.zeros(3)
        visible = [p for p in pixels if in_fov(p, sc)]
        if len(visible) < 3:
            misses += 1
        else:
            misses = 0
        worst_miss = max(worst_miss, misses)
        if sc.disturbance.target_sigma:
            walk += rng.normal(0, sc.disturbance.target_sigma * math.sqrt(dt), 3)
            walk *= 0.95
            walk[0] = 0.0       # lateral shake only
        target.step(np.zeros(3), dt, sc.lag_tau, sc.damping, extra_acc=walk)
        chaser.step(a_cmd, dt, sc.lag_tau, sc.damping)
        if log:
            _log_step(traj, k * dt, chaser, target.pos, dets, tracker.tracks,
                      phase, cmd, err_px if math.isfinite(err_px) else None)
    success = worst_miss <= sc.n_miss
    return EpisodeResult(success=success, mode="follow", seed=seed,
                         terminal_err_px=err_px, steps=n_steps,
                         trajectory=traj)


def run_land(sc: SimScenario, seed: int = 0, log: bool = True) -> EpisodeResult:
    rng = np.random.default_rng(np.random.SeedSequence((seed,)))
    dt = sc.control_period
    n_steps = int(round(sc.episode_s / dt))
    chaser = PointMass(np.array(sc.chaser_start))
    pad = np.asarray(sc.target_start, dtype=float)
    policy = ct.LandingPolicy(ct.LandingConfig(touchdown_mm=sc.touchdown_mm))
    tracker = tr.Tracker(dt=dt, q=sc.tracker_q, r=sc.tracker_r,
                         gate_px=sc.tracker_gate)
    cx, cy = sc.width / 2.0, sc.height / 2.0
    alt0 = sc.chaser_start[2] - pad[2]
    walk = np.zeros(3)
    traj = []
    touchdown_err = None
    committed = False
    last_u = (0.0, 0.0)
    for k in range(n_steps):
        alt = chaser.pos[2] - pad[2]
        props = land_prop_points(pad, sc.prop_half_side_mm)
        pixels = project_down(props, chaser.pos, sc)
        dets = detect(pixels, sc.detector, sc, rng)
        tracker.step(dets)
        conf = _confident_tracks(tracker)
        pad_px = None
        # once committed a 3-corner centroid is biased by the corner that
        # left the frame, so steering needs the full quad
        needed = 4 if committed else 3
        if len(conf) >= needed and alt > sc.touchdown_mm:
            (ux, uy), _ = tr.drone_estimate([t.position for t in conf])
            # normalize the pixel error to a reference altitude so the
            # loop gain and phase thresholds are altitude independent
            scale = alt / sc.alt_ref_mm
            pad_px = (cx + (ux - cx) * scale, cy + (uy - cy) * scale)
        if not committed and policy.phase == ct.DESCEND and alt <= sc.commit_mm:
            committed = True
        if committed:
            # final approach: no aborting; descend fast while steering on
            # the pad as long as it stays visible, then hold the last
            # correction through the blind metres where the pad fills
            # and exits the FOV
            vz = -sc.final_rate
            if pad_px is not None:
                u_r = policy._x.step(pad_px[0] - cx, dt)
                u_p = policy._y.step(pad_px[1] - cy, dt)
                last_u = (u_r, u_p)
            else:
                u_r, u_p = last_u
            if alt <= sc.touchdown_mm:
                policy.phase = ct.LAND
                vz = 0.0
        else:
            u_r, u_p, vz = policy.step(pad_px, (cx, cy), alt, dt)
            last_u = (u_r, u_p)
        a_cmd = np.array([sc.accel_lat * u_r, sc.accel_lat * u_p, 0.0])
        extra = None
        if sc.disturbance.chaser_sigma:
            sigma = sc.disturbance.chaser_sigma * (
                1.0 + sc.disturbance.ground_gain * (1.0 - min(1.0, alt / alt0)))
            walk += rng.normal(0, sigma * math.sqrt(dt), 3)
            walk *= 0.95
            walk[2] = 0.0
            extra = walk
        chaser.step(a_cmd, dt, sc.lag_tau, sc.damping, extra_acc=extra)
        # vertical channel: commanded descent velocity with the same lag
        chaser.vel[2] += (vz - chaser.vel[2]) * min(1.0, dt / sc.lag_tau)
        if log:
            _log_step(traj, k * dt, chaser, pad, dets, tracker.tracks,
                      policy.phase, (u_r, u_p, vz),
                      math.hypot(pad_px[0] - cx, pad_px[1] - cy)
                      if pad_px else None)
        if policy.phase == ct.LAND:
            touchdown_err = math.hypot(chaser.pos[0] - pad[0],
                                       chaser.pos[1] - pad[1])
            break
    success = (policy.phase == ct.LAND and touchdown_err is not None
               and touchdown_err <= sc.lateral_tol_mm)
    return EpisodeResult(success=success, mode="land", seed=seed,
                         touchdown_error_mm=touchdown_err,
                         phase=policy.phase, steps=len(traj) or n_steps,
                         trajectory=traj)


def simulate(scenario: SimScenario, mode: str, seed: int = 0,
             log: bool = True) -> EpisodeResult:
    if mode == "follow":
        return run_follow(scenario, seed, log)
    if mode == "land":
        return run_land(scenario, seed, log)
    raise ValueError(f"unknown mode: {mode!r}")


# --- Monte Carlo --------------------------------------------------------

def _episode_worker(args):
    scenario, mode, seed = args
    r = simulate(scenario, mode, seed, log=False)
    return {"seed": seed, "success": r.success,
            "touchdown_error_mm": r.touchdown_error_mm,
            "terminal_err_px": r.terminal_err_px, "digest": r.digest()}


def worker_count(requested=None):
    cap = os.environ.get("PROPFORGE_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def run_batch(scenario: SimScenario, mode: str, n_episodes: int,
              seed: int = 0, workers: int = None) -> dict:
    """Seeded Monte Carlo batch; episode i uses seed derived from
    (seed, i) so results are independent of worker count."""
    jobs = [(scenario, mode, int(np.random.SeedSequence((seed, i))
                                 .generate_state(1)[0]))
            for i in range(n_episodes)]
    workers = worker_count(workers)
    if workers == 1 or n_episodes <= 2:
        rows = [_episode_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_episode_worker, jobs, chunksize=1))
    rate = sum(r["success"] for r in rows) / n_episodes if n_episodes else 0.0
    return {"mode": mode, "n_episodes": n_episodes, "seed": seed,
            "success_rate": rate, "episodes": rows}
