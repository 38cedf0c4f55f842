import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import label as cc_label
from scipy.stats import chisquare

from propforge import dataset as ds


SMALL = ds.DatasetConfig(width=200, height=160, n_props_min=1, n_props_max=3,
                         r_px_min=20, r_px_max=40)


def test_sample_propeller_config_ranges_and_determinism():
    cfg = ds.DatasetConfig()
    rng = ds.sample_rng(42, 0)
    draws = [ds.sample_propeller_config(rng, cfg) for _ in range(500)]
    assert all(20 <= p.r_px <= 60 for p in draws)
    assert all(5000 <= p.rpm <= 40000 for p in draws)
    assert all(2 <= p.n_blades <= 6 for p in draws)
    assert all(0 <= p.theta_hb < 2 * math.pi for p in draws)
    assert all(abs(math.degrees(p.roll)) <= 60 for p in draws)
    rng2 = ds.sample_rng(42, 0)
    draws2 = [ds.sample_propeller_config(rng2, cfg) for _ in range(500)]
    assert [p.rpm for p in draws] == [p.rpm for p in draws2]


def test_blade_count_histogram_uniform():
    cfg = ds.DatasetConfig()
    rng = ds.sample_rng(7, 0)
    counts = np.bincount(
        [ds.sample_propeller_config(rng, cfg).n_blades for _ in range(10000)],
        minlength=7)[2:7]
    _, p = chisquare(counts)
    assert p > 0.001


def test_make_label_center_and_halfwidth():
    sigma = 8.0
    h = ds.make_label([(100.0, 100.0)], [32.0], sigma, width=200, height=200)
    assert h[100, 100] == pytest.approx(1.0)
    d = sigma * math.sqrt(2 * math.log(2))
    # closed-form Gaussian half-width (sample on the x axis at distance d)
    x = 100 + d
    lo, hi = int(x), int(x) + 1
    val = np.interp(x, [lo, hi], [h[100, lo], h[100, hi]])
    assert val == pytest.approx(0.5, abs=1e-3)
    assert math.isclose(math.exp(-d * d / (2 * sigma * sigma)), 0.5, abs_tol=1e-9)


def test_make_label_empty():
    assert not ds.make_label([], [], width=50, height=40).any()


def test_make_label_max_composition():
    a = ds.make_label([(40.0, 40.0)], [20.0], 5.0, 200, 100)
    b = ds.make_label([(160.0, 60.0)], [20.0], 5.0, 200, 100)
    both = ds.make_label([(40.0, 40.0), (160.0, 60.0)], [20.0, 20.0], 5.0, 200, 100)
    assert np.allclose(both, np.maximum(a, b))


def test_make_label_center_outside_raises():
    with pytest.raises(ValueError):
        ds.make_label([(300.0, 10.0)], [20.0], 5.0, width=200, height=100)


def test_quantize_label_values():
    assert ds.quantize_label(np.array([1.0])) == 254
    assert ds.quantize_label(np.array([0.0])) == 0
    assert ds.quantize_label(np.array([0.5])) == 127


def test_quantize_label_rejects_out_of_range():
    with pytest.raises(ValueError):
        ds.quantize_label(np.array([1.2]))


def test_compose_frame_zero_props():
    cfg = ds.DatasetConfig(width=120, height=100, n_props_min=0, n_props_max=0)
    frame, label, meta = ds.compose_frame(ds.sample_rng(0, 0), cfg)
    assert not frame.any()
    assert not label.any()
    assert meta["propellers"] == []


def test_compose_frame_consistency():
    frame, label, meta = ds.compose_frame(ds.sample_rng(3, 5), SMALL)
    q = ds.quantize_label(label)
    for prop in meta["propellers"]:
        cx, cy = prop["center"]
        assert q[int(round(cy)), int(round(cx))] == 254
    assert np.isin(frame, (-1, 0, 1)).all()
    assert len(meta["propellers"]) >= 1
    assert frame.any()          # contrast guard: propellers fire events


def test_label_argmax_near_metadata_center():
    frame, label, meta = ds.compose_frame(ds.sample_rng(11, 2), SMALL)
    lab, n = cc_label(label > 0.5)
    centers = np.array([p["center"] for p in meta["propellers"]])
    for comp in range(1, n + 1):
        ys, xs = np.nonzero(lab == comp)
        peak = np.argmax(label[ys, xs])
        px, py = xs[peak], ys[peak]
        d = np.hypot(centers[:, 0] - px, centers[:, 1] - py).min()
        assert d <= 1.0


def test_generate_dataset_empty(tmp_path):
    manifest = ds.generate_dataset(0, 1, tmp_path, SMALL, workers=1)
    assert manifest["samples"] == []
    assert not list((tmp_path / "samples").glob("*"))
    assert ds.load_manifest(tmp_path)["count"] == 0


def test_generate_dataset_deterministic_across_workers(tmp_path):
    m1 = ds.generate_dataset(6, 7, tmp_path / "a", SMALL, workers=1)
    m2 = ds.generate_dataset(6, 7, tmp_path / "b", SMALL, workers=3)
    assert m1["samples"] == m2["samples"]
    assert ((tmp_path / "a" / "manifest.json").read_bytes()
            == (tmp_path / "b" / "manifest.json").read_bytes())


def test_verify_dataset_detects_corruption(tmp_path):
    ds.generate_dataset(2, 1, tmp_path, SMALL, workers=1)
    assert ds.verify_dataset(tmp_path) == []
    victim = tmp_path / "samples" / "000001.frame.png"
    data = bytearray(victim.read_bytes())
    data[-1] ^= 0x01
    victim.write_bytes(bytes(data))
    assert ds.verify_dataset(tmp_path) == ["samples/000001.frame.png"]


def test_load_sample_roundtrip(tmp_path):
    ds.generate_dataset(2, 5, tmp_path, SMALL, workers=1)
    frame, label, meta = ds.load_sample(tmp_path, 0)
    assert frame.shape == (160, 200)
    assert np.isin(frame, (-1, 0, 1)).all()
    assert 0 <= label.min() and label.max() <= 1.0
    assert meta["index"] == 0
    raw = json.loads((tmp_path / "samples" / "000000.meta.json").read_text())
    assert raw == meta
    for prop in meta["propellers"]:
        assert set(prop) >= {"center", "r_px", "n_blades", "rpm",
                             "theta_hb_rad", "homography", "color", "tau",
                             "aliased"}
        assert len(prop["homography"]) == 9


def test_corruption_config_applied(tmp_path):
    cfg = ds.DatasetConfig(width=160, height=120, n_props_min=1, n_props_max=2,
                           r_px_min=20, r_px_max=30, p_n=0.02)
    frame, _, meta = ds.compose_frame(ds.sample_rng(1, 1), cfg)
    assert meta["p_n"] == 0.02
    # background pixels away from propellers should carry some noise
    assert (frame != 0).mean() > 0.005


def test_procedural_background_deterministic():
    a = ds.procedural_background(ds.sample_rng(1, 2), 64, 64)
    b = ds.procedural_background(ds.sample_rng(1, 2), 64, 64)
    assert np.array_equal(a, b)
    assert a.dtype == np.uint8
