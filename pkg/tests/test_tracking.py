import math

import numpy as np
import pytest

from propforge import tracking as tr


def test_noise_free_convergence():
    # constant-velocity target, exact measurements, Q = 0: after enough
    # updates the filter must recover position and velocity near exactly
    dt = 1.0 / 15.0
    vx, vy = 30.0, -12.0
    t = tr.new_track((5.0, 7.0))
    for k in range(1, 51):
        t = tr.kf_predict(t, dt, q=0.0)
        z = (5.0 + vx * k * dt, 7.0 + vy * k * dt)
        t = tr.kf_update(t, z, r=1e-9)
    assert abs(t.x[0] - (5.0 + vx * 50 * dt)) < 1e-6
    assert abs(t.x[1] - (7.0 + vy * 50 * dt)) < 1e-6
    assert abs(t.x[2] - vx) < 1e-6
    assert abs(t.x[3] - vy) < 1e-6


def test_covariance_stays_psd_and_symmetric():
    rng = np.random.default_rng(0)
    t = tr.new_track((0.0, 0.0))
    for _ in range(500):
        t = tr.kf_predict(t, 1 / 15, q=50.0)
        t = tr.kf_update(t, rng.normal(0, 2, 2), r=4.0)
        assert np.allclose(t.P, t.P.T)
        assert np.linalg.eigvalsh(t.P).min() > -1e-9


def test_update_shrinks_position_variance():
    t = tr.new_track((0.0, 0.0))
    before = t.P[0, 0]
    t2 = tr.kf_update(t, (0.0, 0.0), r=1.0)
    assert t2.P[0, 0] < before


def test_predict_grows_uncertainty_with_q():
    t = tr.new_track((0.0, 0.0))
    t = tr.kf_update(t, (0.0, 0.0), r=1.0)
    grown = tr.kf_predict(t, 0.5, q=10.0)
    assert grown.P[0, 0] > t.P[0, 0]


def test_predict_moves_state():
    t = tr.TrackState(x=np.array([1.0, 2.0, 10.0, -4.0]), P=np.eye(4))
    t2 = tr.kf_predict(t, 0.5)
    assert t2.x[0] == pytest.approx(6.0)
    assert t2.x[1] == pytest.approx(0.0)


def test_kf_smooths_noise():
    # RMS error of the filtered track should beat the raw measurements
    rng = np.random.default_rng(3)
    dt = 1 / 15
    t = tr.new_track((0.0, 0.0))
    errs_f, errs_m = [], []
    for k in range(1, 300):
        truth = np.array([3.0 * k * dt, -2.0 * k * dt])
        z = truth + rng.normal(0, 3.0, 2)
        t = tr.kf_predict(t, dt, q=1.0)
        t = tr.kf_update(t, z, r=9.0)
        if k > 50:
            errs_f.append(np.hypot(*(t.x[:2] - truth)))
            errs_m.append(np.hypot(*(z - truth)))
    assert np.mean(errs_f) < 0.6 * np.mean(errs_m)


def test_associate_basic():
    tracks = [tr.new_track((0.0, 0.0), 0), tr.new_track((100.0, 0.0), 1)]
    dets = [(101.0, 1.0), (2.0, -1.0)]
    pairs, ut, ud = tr.associate(tracks, dets)
    assert sorted(pairs) == [(0, 1), (1, 0)]
    assert ut == [] and ud == []


def test_associate_gate():
    tracks = [tr.new_track((0.0, 0.0))]
    pairs, ut, ud = tr.associate(tracks, [(100.0, 0.0)], gate_px=40.0)
    assert pairs == [] and ut == [0] and ud == [0]


def test_associate_tie_breaks_on_index():
    tracks = [tr.new_track((0.0, 0.0), 0), tr.new_track((10.0, 0.0), 1)]
    dets = [(5.0, 0.0)]
    pairs, _, _ = tr.associate(tracks, dets)
    assert pairs == [(0, 0)]


def test_associate_one_to_one():
    tracks = [tr.new_track((0.0, 0.0))]
    dets = [(1.0, 0.0), (2.0, 0.0)]
    pairs, ut, ud = tr.associate(tracks, dets)
    assert pairs == [(0, 0)]
    assert ud == [1]


def test_tracker_spawns_and_prunes():
    tk = tr.Tracker(max_misses=2)
    tk.step([(10.0, 10.0)])
    assert len(tk.tracks) == 1
    tid = tk.tracks[0].track_id
    for _ in range(3):
        tk.step([])
    assert tk.tracks == []
    tk.step([(200.0, 50.0)])
    assert tk.tracks[0].track_id != tid


def test_tracker_follows_two_targets():
    tk = tr.Tracker()
    dt = tk.dt
    for k in range(40):
        a = (50.0 + 30.0 * k * dt, 60.0)
        b = (200.0, 100.0 - 20.0 * k * dt)
        tk.step([b, a])        # order deliberately unstable
    assert len(tk.tracks) == 2
    by_id = sorted(tk.tracks, key=lambda t: t.track_id)
    pos = sorted(t.position for t in by_id)
    assert abs(pos[0][0] - (50.0 + 30.0 * 39 * dt)) < 2.0
    assert abs(pos[1][1] - (100.0 - 20.0 * 39 * dt)) < 2.0


def test_drone_estimate_square():
    pts = [(0, 0), (10, 0), (10, 10), (0, 10)]
    (cx, cy), area = tr.drone_estimate(pts)
    assert (cx, cy) == pytest.approx((5.0, 5.0))
    assert area == pytest.approx(100.0)


def test_drone_estimate_order_invariant():
    rng = np.random.default_rng(5)
    pts = [(0, 0), (12, 1), (11, 9), (-1, 10)]
    base = tr.drone_estimate(pts)
    for _ in range(10):
        perm = rng.permutation(4)
        got = tr.drone_estimate([pts[i] for i in perm])
        assert got[0] == pytest.approx(base[0])
        assert got[1] == pytest.approx(base[1])


def test_drone_estimate_degenerate():
    (cx, cy), area = tr.drone_estimate([(3.0, 4.0)])
    assert (cx, cy) == (3.0, 4.0) and area == 0.0
    (cx, cy), area = tr.drone_estimate([(0.0, 0.0), (2.0, 2.0)])
    assert (cx, cy) == (1.0, 1.0) and area == 0.0
    # collinear triple
    _, area = tr.drone_estimate([(0, 0), (1, 1), (2, 2)])
    assert area == 0.0
    with pytest.raises(ValueError):
        tr.drone_estimate([])


def test_drone_estimate_triangle_oracle():
    pts = [(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]
    (cx, cy), area = tr.drone_estimate(pts)
    assert area == pytest.approx(6.0)
    assert (cx, cy) == pytest.approx((4 / 3, 1.0))
