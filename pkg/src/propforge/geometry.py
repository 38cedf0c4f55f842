"""Helicoidal propeller model, pinhole projection and the 4-spline blade outline.

All angles are stored and passed in radians.  The degree-form constants that
appear in the classic marine-propeller formulas (arc angles written as
``90 c cos(theta) / (pi r)`` degrees) are converted to their radian
equivalents here, so every public function speaks radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

def elliptic_chord(c_max: float) -> Callable[[float], float]:
    """Elliptic chord taper c(rho) = c_max * sqrt(1 - (2 rho - 1)^2)."""

    def chord(rho: float) -> float:
        rho = min(max(rho, 0.0), 1.0)
        return c_max * math.sqrt(max(0.0, 1.0 - (2.0 * rho - 1.0) ** 2))

    return chord


@dataclass
class PropellerSpec:
    """Full 3D parameterization of one propeller.  Lengths in mm."""

    pitch: float                      # nose-tail pitch p
    radius: float                     # blade tip radius r
    rake: float = 0.0                 # generator line rake i_G
    skew: float = 0.0                 # skew angle theta_S (rad)
    n_blades: int = 2
    hub_radius: float = 8.0
    chord_profile: Callable[[float], float] = None  # c(rho), rho in [0,1]

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValueError("pitch must be > 0")
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if not self.hub_radius < self.radius:
            raise ValueError("hub_radius must be < radius")
        if not 2 <= self.n_blades <= 6:
            raise ValueError("n_blades must be in [2, 6]")
        if self.chord_profile is None:
            self.chord_profile = elliptic_chord(0.35 * self.radius)

    def pitch_angle(self, r_station: float) -> float:
        """theta = atan(p / (2 pi r)) at a radial station."""
        if r_station <= 0:
            raise ValueError("r_station must be > 0")
        return math.atan(self.pitch / (TWO_PI * r_station))


@dataclass
class BladeSection:
    """Aerofoil section sample at one chordal position."""

    x_c: float          # non-dimensional chordal position in [0, 1]
    y_c: float = 0.0    # chord-line offset (mm)
    y_t: float = 0.0    # section ordinate (mm), >= 0
    psi: float = 0.0    # chamber-line slope (rad)

    def __post_init__(self):
        if self.y_t < 0:
            raise ValueError("y_t must be >= 0")
        if not -math.pi / 2 < self.psi < math.pi / 2:
            raise ValueError("psi must lie in (-pi/2, pi/2)")

    def upper_ordinate(self, top: bool = True) -> float:
        """y_u = y_c +/- y_t cos(psi); + selects the top surface."""
        s = 1.0 if top else -1.0
        return self.y_c + s * self.y_t * math.cos(self.psi)


@dataclass
class CameraRig:
    """Pinhole intrinsics and pose."""

    f: float
    c_x: float
    c_y: float
    R: np.ndarray = None
    T: np.ndarray = None
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be > 0")
        if self.R is None:
            self.R = np.eye(3)
        self.R = np.asarray(self.R, dtype=float)
        if self.T is None:
            self.T = np.zeros(3)
        self.T = np.asarray(self.T, dtype=float)
        if not np.allclose(self.R @ self.R.T, np.eye(3), atol=1e-9):
            raise ValueError("R must be orthonormal")
        if not math.isclose(float(np.linalg.det(self.R)), 1.0, abs_tol=1e-9):
            raise ValueError("R must have det +1")

    @property
    def K(self) -> np.ndarray:
        return np.array([
            [self.f, 0.0, self.c_x],
            [0.0, self.f, self.c_y],
            [0.0, 0.0, 1.0],
        ])


# ---------------------------------------------------------------------------
# 3D model
# ---------------------------------------------------------------------------

def helicoidal_point(p: float, r: float, phi: float) -> np.ndarray:
    """Point on the helicoidal surface: [p phi / 2pi, r sin phi, r cos phi]."""
    return np.array([p * phi / TWO_PI, r * math.sin(phi), r * math.cos(phi)])


def midchord_point(spec: PropellerSpec, r_station: float, phi: float) -> np.ndarray:
    """Locus of the blade's mid-chord points at a radial station."""
    if not 0 < r_station <= spec.radius:
        raise ValueError("r_station out of range (0, radius]")
    ax = -(spec.rake + spec.pitch * spec.skew / TWO_PI)
    a = phi - spec.skew
    return np.array([ax, -r_station * math.sin(a), r_station * math.cos(a)])


def edge_points(spec: PropellerSpec, r_station: float, phi: float):
    """Leading and trailing edge points at a radial station.

    The + branch of the arc offset is the leading edge (sign-symmetric for
    detection purposes; the convention is fixed here).
    """
    if r_station <= 0:
        raise ValueError("r_station must be > 0")
    c = spec.chord_profile(r_station / spec.radius)
    if c < 0:
        raise ValueError("chord must be >= 0")
    theta = spec.pitch_angle(r_station)
    ax = -(spec.rake + spec.pitch * spec.skew / TWO_PI + 0.5 * c * math.sin(theta))
    # half-chord arc angle: the paper's 90 c cos(theta) / (pi r) degrees
    da = c * math.cos(theta) / (2.0 * r_station)
    pts = []
    for sgn in (+1.0, -1.0):
        a = phi - spec.skew + sgn * da
        pts.append(np.array([ax, -r_station * math.sin(a), r_station * math.cos(a)]))
    return pts[0], pts[1]


def blade_point_local(spec: PropellerSpec, section: BladeSection,
                      r_station: float, top: bool = True) -> np.ndarray:
    """Aerofoil surface point in the blade-local frame (chord mid point origin)."""
    if r_station <= 0:
        raise ValueError("r_station must be > 0")
    c = spec.chord_profile(r_station / spec.radius)
    theta = spec.pitch_angle(r_station)
    y_u = section.upper_ordinate(top)
    xi = 0.5 * c - section.x_c * c          # chordwise offset from mid chord
    ax = -(spec.rake + spec.pitch * spec.skew / TWO_PI) - (
        xi * math.sin(theta) + y_u * math.cos(theta))
    # circumferential offset as an arc angle at this station
    arc = (xi * math.cos(theta) - y_u * math.sin(theta)) / r_station
    a = spec.skew - arc
    return np.array([ax, r_station * math.sin(a), r_station * math.cos(a)])


def to_world(x: np.ndarray, phi_blade: float) -> np.ndarray:
    """Rotate a blade-local point about the X axis by the blade angle."""
    c, s = math.cos(phi_blade), math.sin(phi_blade)
    R = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return R @ np.asarray(x, dtype=float)


def project(rig: CameraRig, X: np.ndarray) -> np.ndarray:
    """Pinhole projection K [R, T] X, dehomogenized."""
    Xc = rig.R @ np.asarray(X, dtype=float) + rig.T
    if Xc[2] <= 0:
        raise ValueError("point has non-positive depth (behind camera)")
    h = rig.K @ Xc
    return h[:2] / h[2]


# ---------------------------------------------------------------------------
# B-splines (uniform knots, Cox-de Boor)
# ---------------------------------------------------------------------------

def uniform_knots(n_ctrl: int, k: int = 3) -> np.ndarray:
    """m+1 uniformly spaced knots with m = n + k + 1 (n = n_ctrl - 1)."""
    m = (n_ctrl - 1) + k + 1
    return np.arange(m + 1, dtype=float)


def bspline_basis(i: int, k: int, t: float, knots: Sequence[float]) -> float:
    """N_{i,k}(t) by the Cox-de Boor recursion; 0/0 terms are defined as 0."""
    knots = np.asarray(knots, dtype=float)
    valid_lo, valid_hi = knots[k], knots[len(knots) - 1 - k]
    if not valid_lo <= t <= valid_hi:
        raise ValueError(f"t={t} outside valid span [{valid_lo}, {valid_hi}]")
    return _basis(i, k, t, knots, valid_hi)


def _basis(i: int, k: int, t: float, knots: np.ndarray, t_end: float) -> float:
    if k == 0:
        # half-open intervals; the right end of the valid span is closed so
        # that partition of unity holds at t = t_end
        if t == t_end:
            return 1.0 if knots[i] < t <= knots[i + 1] else 0.0
        return 1.0 if knots[i] <= t < knots[i + 1] else 0.0
    left = 0.0
    d = knots[i + k] - knots[i]
    if d > 0:
        left = (t - knots[i]) / d * _basis(i, k - 1, t, knots, t_end)
    right = 0.0
    d = knots[i + k + 1] - knots[i + 1]
    if d > 0:
        right = (knots[i + k + 1] - t) / d * _basis(i + 1, k - 1, t, knots, t_end)
    return left + right


def bspline_eval(control_points: np.ndarray, k: int, t: float) -> np.ndarray:
    """s(t) = sum_i p_i N_{i,k}(t) on uniform knots."""
    cps = np.asarray(control_points, dtype=float)
    if len(cps) < k + 1:
        raise ValueError(f"need at least {k + 1} control points for degree {k}")
    knots = uniform_knots(len(cps), k)
    w = np.array([bspline_basis(i, k, t, knots) for i in range(len(cps))])
    return w @ cps


@lru_cache(maxsize=64)
def _basis_matrix(n_ctrl: int, k: int, n: int):
    knots = uniform_knots(n_ctrl, k)
    ts = np.linspace(knots[k], knots[len(knots) - 1 - k], n)
    W = np.array([[bspline_basis(i, k, t, knots) for i in range(n_ctrl)]
                  for t in ts])
    W.setflags(write=False)
    return W


def bspline_sample(control_points: np.ndarray, k: int, n: int) -> np.ndarray:
    """n samples of the curve over its valid span [t_k, t_{m-k}]."""
    cps = np.asarray(control_points, dtype=float)
    if len(cps) < k + 1:
        raise ValueError(f"need at least {k + 1} control points for degree {k}")
    return _basis_matrix(len(cps), k, n) @ cps


# ---------------------------------------------------------------------------
# blade outline from four chained cubic splines
# ---------------------------------------------------------------------------

@dataclass
class SplineBladeShape:
    """Four chained uniform cubic B-splines describing one blade contour.

    Stored in traversal order hub -> bottom edge -> tip -> top edge.
    Consecutive splines share their 3 junction control points so the curve
    endpoints coincide exactly and the contour closes.
    """

    hub: np.ndarray
    bottom: np.ndarray
    tip: np.ndarray
    top: np.ndarray
    hub_radius_px: float = 18.0
    degree: int = 3

    def __post_init__(self):
        self.hub = np.asarray(self.hub, dtype=float)
        self.bottom = np.asarray(self.bottom, dtype=float)
        self.tip = np.asarray(self.tip, dtype=float)
        self.top = np.asarray(self.top, dtype=float)
        for cps in self.splines():
            if len(cps) < self.degree + 1:
                raise ValueError("each spline needs >= 4 control points")
        gaps = self.junction_gaps()
        if max(gaps) > 1e-6:
            raise ValueError(f"splines do not chain into a closed contour: {gaps}")

    def splines(self):
        return [self.hub, self.bottom, self.tip, self.top]

    def _endpoints(self, cps: np.ndarray):
        start = (cps[0] + 4.0 * cps[1] + cps[2]) / 6.0
        end = (cps[-3] + 4.0 * cps[-2] + cps[-1]) / 6.0
        return start, end

    def junction_gaps(self):
        sp = self.splines()
        gaps = []
        for j in range(4):
            _, end = self._endpoints(sp[j])
            start, _ = self._endpoints(sp[(j + 1) % 4])
            gaps.append(float(np.linalg.norm(end - start)))
        return gaps

    @property
    def nominal_radius_px(self) -> float:
        return float(max(np.linalg.norm(cps, axis=1).max() for cps in self.splines()))


def shape_from_loop(loop: np.ndarray, splits: Sequence[int],
                    hub_radius_px: float) -> SplineBladeShape:
    """Build a blade shape from one closed control loop.

    ``splits`` gives the loop index where each of the four splines starts, in
    traversal order hub, bottom, tip, top.  Each spline takes the control
    points from its split up to and including the next split + 2 (cyclic), so
    consecutive splines share 3 control points.
    """
    loop = np.asarray(loop, dtype=float)
    L = len(loop)
    parts = []
    for j in range(4):
        a = splits[j]
        b = splits[(j + 1) % 4]
        idx = [(a + s) % L for s in range(((b - a) % L) + 3)]
        parts.append(loop[idx])
    return SplineBladeShape(hub=parts[0], bottom=parts[1], tip=parts[2],
                            top=parts[3], hub_radius_px=hub_radius_px)


_PRESET_LOOPS = {
    # closed CCW control loops, blade along +Y, hub center at the origin
    "normal": (
        [
            (-7.6, 16.3), (0.0, 18.2), (7.6, 16.3),            # hub arc
            (13.8, 11.6), (18.0, 35.0), (20.0, 60.0), (16.0, 85.0),  # bottom
            (10.0, 98.0), (0.0, 103.0), (-10.0, 98.0),          # tip
            (-16.0, 85.0), (-19.0, 60.0), (-17.0, 35.0), (-13.8, 11.6),  # top
        ],
        (0, 3, 7, 10),
        18.0,
    ),
    "bullnose": (
        [
            (-8.5, 16.0), (0.0, 18.2), (8.5, 16.0),
            (15.0, 11.0), (24.0, 35.0), (28.0, 62.0), (27.0, 86.0),
            (20.0, 100.0), (0.0, 106.0), (-20.0, 100.0),
            (-27.0, 86.0), (-28.0, 62.0), (-24.0, 35.0), (-15.0, 11.0),
        ],
        (0, 3, 7, 10),
        18.0,
    ),
}


def preset_shape(name: str) -> SplineBladeShape:
    """One of the shipped hand-tuned blade shapes ('normal', 'bullnose')."""
    try:
        loop, splits, hub_r = _PRESET_LOOPS[name]
    except KeyError:
        raise ValueError(f"unknown shape preset {name!r}; "
                         f"have {sorted(_PRESET_LOOPS)}") from None
    return shape_from_loop(np.array(loop), splits, hub_r)


def fit_blade_shape(spec: PropellerSpec, px_radius: float = 100.0) -> SplineBladeShape:
    """Blade shape fitted from the 3D model's projected leading/trailing edges.

    The edges are sampled at 4 stations per side with a fronto-parallel view
    along the shaft axis (orthographic in the blade plane) and used directly
    as the control loop of the four chained cubic splines.
    """
    scale = px_radius / spec.radius
    hub_px = spec.hub_radius * scale

    def yz_px(p3):
        # view along -X: image x = -y (so the blade appears upright at
        # skew 0), image y = z
        return np.array([-p3[1] * scale, p3[2] * scale])

    r0 = spec.hub_radius * 1.05
    stations_up = np.linspace(r0, 0.97 * spec.radius, 4)
    bottom = [yz_px(edge_points(spec, r, 0.0)[1]) for r in stations_up]
    top = [yz_px(edge_points(spec, r, 0.0)[0]) for r in reversed(stations_up)]
    # tip cap: midchord direction at the very tip, flared slightly outward
    tip_mid = yz_px(midchord_point(spec, spec.radius, 0.0))
    le_t = yz_px(edge_points(spec, 0.985 * spec.radius, 0.0)[0])
    te_t = yz_px(edge_points(spec, 0.985 * spec.radius, 0.0)[1])
    tip = [te_t, tip_mid * 1.03, le_t]
    # hub arc across the blade root, on the hub circle
    a0 = math.atan2(bottom[0][0], bottom[0][1])
    a1 = math.atan2(top[-1][0], top[-1][1])
    hub = [hub_px * np.array([math.sin(a), math.cos(a)])
           for a in np.linspace(a1, a0, 3)]
    loop = np.array(hub + bottom + tip + top)
    splits = (0, 3, 3 + 4, 3 + 4 + 3)
    return shape_from_loop(loop, splits, hub_px)


def blade_outline(shape: SplineBladeShape, theta_hb: float = 0.0,
                  samples_per_spline: int = 64) -> np.ndarray:
    """Closed 2D polygonal contour of one blade, rotated by theta_hb."""
    pts = []
    for cps in shape.splines():
        seg = bspline_sample(cps, shape.degree, samples_per_spline)
        pts.append(seg[:-1])        # junction point repeats at the next start
    contour = np.vstack(pts)
    return rotate2d(contour, theta_hb)


def rotate2d(pts: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return np.asarray(pts, dtype=float) @ R.T


def hub_disc_outline(shape: SplineBladeShape, n_blades: int,
                     theta_hb: float = 0.0, samples_per_blade: int = 24) -> np.ndarray:
    """Hub disc contour, sampled so the point set is n-fold symmetric."""
    n = n_blades * samples_per_blade
    a = theta_hb + TWO_PI * np.arange(n) / n
    return shape.hub_radius_px * np.stack([np.sin(a), np.cos(a)], axis=1)


def propeller_outline(shape: SplineBladeShape, n_blades: int,
                      theta_hb: float = 0.0,
                      samples_per_spline: int = 64) -> list[np.ndarray]:
    """Blade contours at uniform angular spacing, plus the hub disc."""
    if not 2 <= n_blades <= 6:
        raise ValueError("n_blades must be in [2, 6]")
    base = blade_outline(shape, 0.0, samples_per_spline)
    contours = [rotate2d(base, theta_hb + TWO_PI * j / n_blades)
                for j in range(n_blades)]
    contours.append(hub_disc_outline(shape, n_blades, theta_hb))
    return contours


# ---------------------------------------------------------------------------
# rasterization (scanline fill, no anti-aliasing)
# ---------------------------------------------------------------------------

def fill_polygon(mask: np.ndarray, poly: np.ndarray) -> None:
    """Even-odd scanline fill of one polygon into a boolean mask, in place.

    A pixel is inside when its center (col + 0.5, row + 0.5) is inside the
    polygon.
    """
    h, w = mask.shape
    poly = np.asarray(poly, dtype=float)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    row_lo = max(0, int(math.floor(poly[:, 1].min() - 0.5)))
    row_hi = min(h - 1, int(math.ceil(poly[:, 1].max() - 0.5)))
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        crossing = (y0 <= yc) != (y1 <= yc)
        if not crossing.any():
            continue
        t = (yc - y0[crossing]) / (y1[crossing] - y0[crossing])
        xs = np.sort(x0[crossing] + t * (x1[crossing] - x0[crossing]))
        for a, b in zip(xs[0::2], xs[1::2]):
            lo = max(0, int(math.ceil(a - 0.5)))
            hi = min(w, int(math.ceil(b - 0.5)))
            if hi > lo:
                mask[row, lo:hi] = True


def apply_homography(pts: np.ndarray, H: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    hom = np.hstack([pts, np.ones((len(pts), 1))]) @ np.asarray(H, dtype=float).T
    return hom[:, :2] / hom[:, 2:3]


def silhouette_mask(contours: Sequence[np.ndarray], height: int, width: int,
                    H: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Union fill of the warped contours as a boolean mask."""
    H = np.asarray(H, dtype=float)
    if abs(np.linalg.det(H)) < 1e-12:
        raise ValueError("homography is singular")
    mask = np.zeros((height, width), dtype=bool)
    for contour in contours:
        warped = apply_homography(np.asarray(contour) * scale, H)
        fill_polygon(mask, warped)
    return mask


def rasterize(contours: Sequence[np.ndarray], color: int, canvas: np.ndarray,
              H: np.ndarray = None, scale: float = 1.0) -> np.ndarray:
    """Composite a filled propeller silhouette over a copy of the canvas."""
    if canvas.size == 0:
        raise ValueError("canvas is empty")
    if H is None:
        H = np.eye(3)
    out = canvas.copy()
    mask = silhouette_mask(contours, out.shape[0], out.shape[1], H, scale)
    out[mask] = color
    return out


def tilt_homography(roll: float, pitch: float, f_virtual: float = 400.0) -> np.ndarray:
    """Homography of a fronto-parallel plane rotated by roll (about x) and
    pitch (about y), normalized to unit scale and zero shift at the origin."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    R = Rx @ Ry
    K = np.diag([f_virtual, f_virtual, 1.0])
    # plane point (x, y, 0) at depth f_virtual: image = K (R [x y 0]^T + [0 0 f]^T)
    H = K @ np.column_stack([R[:, 0], R[:, 1], np.array([0.0, 0.0, f_virtual])])
    return H / H[2, 2]


def place_homography(center: Sequence[float], roll: float = 0.0,
                     pitch: float = 0.0, f_virtual: float = 400.0) -> np.ndarray:
    """Tilt homography composed with a translation to a pixel center."""
    T = np.array([[1.0, 0.0, center[0]], [0.0, 1.0, center[1]], [0.0, 0.0, 1.0]])
    return T @ tilt_homography(roll, pitch, f_virtual)
