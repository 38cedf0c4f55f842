import math

import numpy as np
import pytest

from propforge import events as ev
from propforge import geometry as geo


def make_scene(color=230, bg=60, size=160, n_blades=3, seed=0):
    rng = np.random.default_rng(seed)
    background = np.clip(rng.normal(bg, 10, (size, size)), 0, 255).astype(np.uint8)
    return ev.PropScene(
        background=background,
        shape=geo.preset_shape("normal"),
        n_blades=n_blades,
        color=color,
        homography=geo.place_homography((size / 2, size / 2)),
        scale=0.6,
    )


def test_render_pair_zero_dtheta_identical():
    scene = make_scene()
    a, b = ev.render_pair(scene, 0.7, 0.0)
    assert np.array_equal(a, b)


def test_render_pair_blade_symmetry_aliasing():
    scene = make_scene(n_blades=3)
    a, b = ev.render_pair(scene, 0.2, 2 * math.pi / 3)
    assert np.array_equal(a, b)


def test_delta_theta_unit_conversion():
    cfg = ev.EventSynthConfig(rpm=10000, delta_t_ms=1.0)
    assert math.isclose(cfg.delta_theta, 10000 * 2 * math.pi / 60 * 1e-3,
                        rel_tol=1e-12)
    assert math.isclose(cfg.delta_theta, 1.047, abs_tol=1e-3)


def test_trigger_identical_images_empty():
    img = np.random.default_rng(0).integers(0, 256, (50, 60)).astype(np.uint8)
    cloud = ev.trigger_events(img, img, 0.3)
    assert len(cloud) == 0
    assert ev.event_frame(cloud).shape == (50, 60)


def test_trigger_single_pixel_polarity():
    a = np.full((4, 4), 100, np.uint8)
    b = a.copy()
    a[1, 2] = 50
    b[1, 2] = 200
    cloud = ev.trigger_events(a, b, 0.5)
    # |log 50 - log 200| = log 4 ~ 1.386 >= 0.5
    assert len(cloud) == 1
    assert tuple(cloud.xy[0]) == (2, 1)
    assert cloud.polarity[0] == -1


def test_trigger_monotone_in_tau():
    rng = np.random.default_rng(3)
    for s in range(20):
        scene = make_scene(seed=s, color=int(rng.integers(150, 256)))
        i_t, i_dt = ev.render_pair(scene, rng.uniform(0, 2 * math.pi), 0.4)
        counts = [len(ev.trigger_events(i_t, i_dt, tau))
                  for tau in (0.1, 0.3, 0.6, 1.0, 2.0)]
        assert counts == sorted(counts, reverse=True)


def test_trigger_swap_negates_polarity():
    scene = make_scene()
    i_t, i_dt = ev.render_pair(scene, 0.1, 0.5)
    fwd = ev.trigger_events(i_t, i_dt, 0.3)
    rev = ev.trigger_events(i_dt, i_t, 0.3)
    assert np.array_equal(fwd.xy, rev.xy)
    assert np.array_equal(fwd.polarity, -rev.polarity)


def test_trigger_dimension_mismatch():
    with pytest.raises(ValueError):
        ev.trigger_events(np.zeros((3, 3), np.uint8), np.zeros((3, 4), np.uint8), 0.5)


def test_edge_polarity_balance():
    # small rotation: events concentrate on leading/trailing edges with
    # opposite polarities
    scene = make_scene(color=240, bg=40)
    i_t, i_dt = ev.render_pair(scene, 0.3, 0.08)
    cloud = ev.trigger_events(i_t, i_dt, 0.3)
    assert len(cloud) > 50
    assert abs(cloud.polarity.sum()) / len(cloud) < 0.2


def test_event_frame_basics():
    cloud = ev.EventCloud(np.array([[2, 1]], np.int32), np.zeros(1),
                          np.array([1], np.int8), width=5, height=4)
    frame = ev.event_frame(cloud)
    assert frame[1, 2] == 1
    assert frame.sum() == 1


def test_event_frame_mixed_polarity_cancels():
    xy = np.array([[2, 1], [2, 1]], np.int32)
    cloud = ev.EventCloud(xy, np.array([0.0, 1.0]), np.array([1, -1], np.int8),
                          width=5, height=4)
    assert ev.event_frame(cloud)[1, 2] == 0


def test_sweep_single_step_single_timestamp():
    scene = make_scene()
    cfg = ev.EventSynthConfig(rpm=8000, delta_t_ms=2.0, micro_steps=1)
    cloud = ev.event_cloud_sweep(scene, cfg)
    assert len(np.unique(cloud.t)) == 1


def test_sweep_event_count_at_least_single_pair():
    scene = make_scene()
    one = ev.EventSynthConfig(rpm=12000, delta_t_ms=4.0, micro_steps=1)
    many = ev.EventSynthConfig(rpm=12000, delta_t_ms=4.0, micro_steps=6)
    n_one = len(ev.event_cloud_sweep(scene, one))
    n_many = len(ev.event_cloud_sweep(scene, many))
    assert n_many >= n_one


def test_sweep_helix_monotone_angle():
    # blade-tip events progress monotonically in angle across micro-steps,
    # with slope ~ omega
    scene = make_scene(color=250, bg=30, size=200)
    cfg = ev.EventSynthConfig(rpm=6000, delta_t_ms=5.0, micro_steps=10)
    cloud = ev.event_cloud_sweep(scene, cfg)
    c = np.array([100.0, 100.0])
    rel = cloud.xy - c
    rad = np.linalg.norm(rel, axis=1)
    tip = rad > 0.8 * rad.max()
    # per-step mean unwrapped angle of tip events; 3 blades -> angle mod 2pi/3
    per = 2 * math.pi / 3
    ts = np.unique(cloud.t[tip])
    means = []
    prev = None
    for t in ts:
        sel = tip & (cloud.t == t)
        ang = np.arctan2(rel[sel, 1], rel[sel, 0]) % per
        ref = ang[0] if prev is None else prev % per
        ang = (ang - ref + per / 2) % per + ref - per / 2
        m = ang.mean()
        if prev is not None:
            # unwrap relative to previous step
            while m < prev - per / 2:
                m += per
        means.append(m)
        prev = m
    slopes = np.diff(means) / np.diff(ts * 1e-6)
    assert (slopes > 0).all()
    assert abs(np.median(slopes) - cfg.omega) / cfg.omega < 0.25


def test_corrupt_identity():
    frame = np.random.default_rng(0).integers(-1, 2, (40, 40)).astype(np.int8)
    mask = frame != 0
    out = ev.corrupt(frame, mask, ev.CorruptionConfig(0.0, 0.0, 1))
    assert np.array_equal(out, frame)


def test_corrupt_full_blank():
    frame = np.ones((30, 30), np.int8)
    mask = np.zeros_like(frame, bool)
    mask[5:20, 5:20] = True
    out = ev.corrupt(frame, mask, ev.CorruptionConfig(p_n=0.0, p_b=1.0, rng_seed=2))
    assert (out[mask] == 0).all()
    assert (out[~mask] == 1).all()


def test_corrupt_noise_fraction():
    frame = np.zeros((480, 640), np.int8)
    fracs = []
    for seed in range(10):
        out = ev.corrupt(frame, None, ev.CorruptionConfig(p_n=0.02, rng_seed=seed))
        fracs.append((out != 0).mean())
    assert abs(np.mean(fracs) - 0.02) < 0.002


def test_corrupt_deterministic():
    frame = np.random.default_rng(5).integers(-1, 2, (64, 64)).astype(np.int8)
    mask = frame != 0
    cfg = ev.CorruptionConfig(p_n=0.02, p_b=0.3, rng_seed=99)
    assert np.array_equal(ev.corrupt(frame, mask, cfg), ev.corrupt(frame, mask, cfg))


def test_quantize_frame_exact():
    frame = np.array([[-1, 0], [1, 0]], np.int8)
    q = ev.quantize_frame(frame)
    assert q.dtype == np.uint8
    assert np.array_equal(q, [[0, 127], [255, 127]])


def test_quantize_rejects_non_ternary():
    with pytest.raises(ValueError):
        ev.quantize_frame(np.array([[2]]))


def test_quantize_dequantize_roundtrip():
    rng = np.random.default_rng(0)
    frame = rng.integers(-1, 2, (33, 44)).astype(np.int8)
    assert np.array_equal(ev.dequantize_frame(ev.quantize_frame(frame)), frame)
