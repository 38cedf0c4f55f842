"""PID control and flight policies for following and landing.

Image-plane errors drive attitude and thrust commands: horizontal pixel
error maps to roll, vertical pixel error to pitch, and apparent-area
error to thrust. Landing runs a small state machine that only descends
once the pad is centered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class PID:
    """Discrete PID with clamped integral and output.

    The derivative acts on the error by backward difference; the first
    step has no derivative contribution."""
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    i_limit: float = math.inf
    out_limit: float = math.inf
    _integral: float = 0.0
    _prev_err: float = None

    def reset(self):
        self._integral = 0.0
        self._prev_err = None

    def step(self, err: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be > 0")
        self._integral += err * dt
        self._integral = min(max(self._integral, -self.i_limit), self.i_limit)
        d = 0.0
        if self._prev_err is not None:
            d = (err - self._prev_err) / dt
        self._prev_err = err
        u = self.kp * err + self.ki * self._integral + self.kd * d
        return min(max(u, -self.out_limit), self.out_limit)


@dataclass
class FollowGains:
    """Gains for image-based following.

    Output limits are in command units (normalized tilt / thrust)."""
    roll: PID = field(default_factory=lambda: PID(0.004, 0.0004, 0.002,
                                                  i_limit=200, out_limit=1.0))
    pitch: PID = field(default_factory=lambda: PID(0.004, 0.0004, 0.002,
                                                   i_limit=200, out_limit=1.0))
    thrust: PID = field(default_factory=lambda: PID(0.9, 0.05, 0.3,
                                                    i_limit=5, out_limit=1.0))

    def reset(self):
        self.roll.reset()
        self.pitch.reset()
        self.thrust.reset()


def follow_policy(gains: FollowGains, target_px, center_px, dt: float,
                  area: float = None, area_ref: float = None):
    """Commands (u_roll, u_pitch, u_thrust) that recenter the target.

    target_px is the detected target center, center_px the image center.
    The thrust channel regulates the apparent-area ratio toward 1; if
    area is unavailable the thrust command is 0 (hold)."""
    e_x = target_px[0] - center_px[0]
    e_y = target_px[1] - center_px[1]
    u_roll = gains.roll.step(e_x, dt)
    u_pitch = gains.pitch.step(e_y, dt)
    if area is None or area_ref is None or area_ref <= 0:
        u_thrust = 0.0
    else:
        e_a = 1.0 - area / area_ref
        u_thrust = gains.thrust.step(e_a, dt)
    return u_roll, u_pitch, u_thrust


# landing state machine --------------------------------------------------

EXPLORE = "EXPLORE"
ALIGN = "ALIGN"
DESCEND = "DESCEND"
LAND = "LAND"

PHASES = (EXPLORE, ALIGN, DESCEND, LAND)


@dataclass
class LandingConfig:
    align_px: float = 10.0        # pixel error below which descent starts
    lose_px: float = 25.0         # error above which descent aborts to ALIGN
    descend_rate: float = 250.0   # mm/s
    touchdown_mm: float = 20.0    # altitude treated as landed
    lateral_gain: float = 0.001
    lateral_ki: float = 0.0003
    lateral_kd: float = 0.0004


@dataclass
class LandingPolicy:
    """EXPLORE -> ALIGN -> DESCEND -> LAND.

    Transitions:
      EXPLORE -> ALIGN    pad detected this step
      ALIGN   -> DESCEND  pixel error < align_px
      ALIGN   -> EXPLORE  pad lost
      DESCEND -> ALIGN    pixel error > lose_px (abort, recenter)
      DESCEND -> EXPLORE  pad lost
      DESCEND -> LAND     altitude <= touchdown_mm
    EXPLORE never jumps straight to DESCEND, and LAND is terminal."""
    cfg: LandingConfig = field(default_factory=LandingConfig)
    phase: str = EXPLORE
    _x: PID = None
    _y: PID = None

    def __post_init__(self):
        c = self.cfg
        self._x = PID(c.lateral_gain, c.lateral_ki, c.lateral_kd,
                      i_limit=200, out_limit=1.0)
        self._y = PID(c.lateral_gain, c.lateral_ki, c.lateral_kd,
                      i_limit=200, out_limit=1.0)

    def step(self, pad_px, center_px, altitude_mm: float, dt: float):
        """Returns (u_roll, u_pitch, vz_mm_s). pad_px is None when the
        pad was not detected this frame."""
        cfg = self.cfg
        if self.phase == LAND:
            return 0.0, 0.0, 0.0
        if pad_px is None:
            if self.phase in (ALIGN, DESCEND):
                self.phase = EXPLORE
            self._x.reset()
            self._y.reset()
            return 0.0, 0.0, 0.0
        e_x = pad_px[0] - center_px[0]
        e_y = pad_px[1] - center_px[1]
        err = math.hypot(e_x, e_y)
        if self.phase == EXPLORE:
            self.phase = ALIGN
        if self.phase == ALIGN and err < cfg.align_px:
            self.phase = DESCEND
        elif self.phase == DESCEND and err > cfg.lose_px:
            self.phase = ALIGN
        u_roll = self._x.step(e_x, dt)
        u_pitch = self._y.step(e_y, dt)
        vz = 0.0
        if self.phase == DESCEND:
            vz = -cfg.descend_rate
            if altitude_mm <= cfg.touchdown_mm:
                self.phase = LAND
                vz = 0.0
        return u_roll, u_pitch, vz
