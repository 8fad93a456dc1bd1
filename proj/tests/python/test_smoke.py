import json
import math

import numpy as np
import pytest

import viewdiv as vd


def test_geometry():
    a = vd.Rect(0, 0, 2, 2)
    b = vd.Rect(1, 1, 3, 3)
    assert vd.iou(a, b) == pytest.approx(1 / 7)
    assert vd.iou(a, a) == 1.0
    assert vd.contains(vd.Rect(0, 0, 10, 10), a)


def test_sample_rrc_law_and_determinism():
    scale = vd.CropScale(0.2, 1.0)
    r = vd.sample_rrc(224, 224, scale, 7)
    assert r == vd.sample_rrc(224, 224, scale, 7)
    frac = r.area / (224 * 224)
    assert 0.2 - 1e-9 <= frac <= 1.0 + 1e-9
    ratio = (r.x_max - r.x_min) / (r.y_max - r.y_min)
    assert 0.75 - 1e-9 <= ratio <= 4 / 3 + 1e-9


def test_pairs_satisfy_their_config():
    img = vd.AnnotatedImage("a", 224, 224, [vd.Rect(10, 10, 90, 90)])
    other = vd.AnnotatedImage("b", 224, 224, [vd.Rect(100, 100, 200, 200)])
    for kind in ["Baseline", "ZeroOverlap", "LowerBound", "SmallerCrop"]:
        cfg = vd.PairConfig(kind)
        partner = other if kind == "LowerBound" else None
        pair = vd.generate_pair(img, cfg, 3, partner)
        assert vd.satisfies_config(pair, [img, other], cfg)
        if kind == "ZeroOverlap":
            assert vd.iou(pair.v1, pair.v2) == 0.0
        if kind == "LowerBound":
            assert pair.image_ids == ("a", "b")


def test_grid_and_sampled_patches():
    view = vd.Rect(0, 0, 90, 90)
    grid = vd.grid_patches(view, 3)
    assert len(grid) == 9
    assert sum(p.area for p in grid) == pytest.approx(view.area)
    sampled = vd.sampled_patches(view, 1)
    assert len(sampled) == 9
    assert all(vd.contains(view, p) for p in sampled)


def test_toy_encode():
    pixels = np.full((16, 16, 3), 128, dtype=np.uint8)
    f = np.asarray(vd.toy_encode(pixels))
    assert f.shape == (192,)
    assert np.allclose(f, 1 / math.sqrt(192))
    with pytest.raises(vd.ViewdivError):
        vd.toy_encode(np.zeros((4, 4), dtype=np.uint8))


def test_transport():
    x = np.eye(3)
    c = vd.cost_matrix(x, x)
    assert np.allclose(c, 1 - np.eye(3))
    p = vd.sinkhorn(c)
    assert np.allclose(p.sum(axis=0), 1 / 3, atol=1e-12)
    assert np.allclose(vd.exact_plan(c), np.eye(3) / 3)
    rng = np.random.default_rng(0)
    y = rng.normal(size=(5, 16))
    z = rng.normal(size=(5, 16))
    s_exact = vd.similarity(y, z, solver="exact")
    assert vd.similarity(y, z) <= s_exact + 1e-9
    assert abs(vd.similarity(y, z, lam=200.0, iterations=500) - s_exact) <= 1e-2


def test_losses():
    loss, grad = vd.info_nce([1.0, 0.0], [0.5, 0.5], np.array([[0.5, 0.5], [0.5, 0.5]]), 0.1)
    assert loss == pytest.approx(math.log(3), abs=1e-12)
    assert len(grad) == 2
    assert vd.dino_ce([0.7, 0.3], [math.log(0.5)] * 2) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        vd.info_nce([1.0], [1.0], np.zeros((0, 1)), 0.0)


def test_embedding_round_trip(tmp_path):
    f = np.arange(18, dtype=np.float32).reshape(3, 6) / 7
    path = tmp_path / "x.femb"
    vd.write_embeddings(path, f)
    assert path.read_bytes()[:4] == b"FEMB"
    assert np.array_equal(vd.load_embeddings(path), f.astype(np.float64))
    path.write_bytes(b"JUNK" + path.read_bytes()[4:])
    with pytest.raises(vd.ViewdivError):
        vd.load_embeddings(path)


def _write_ppm(path, w, h, seed):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + pixels.tobytes())


def test_score_and_range_rule(tmp_path):
    images = []
    for i in range(4):
        name = f"im{i}.ppm"
        _write_ppm(tmp_path / name, 64, 48, i)
        images.append({"id": f"im{i}", "path": name, "width": 64, "height": 48,
                       "boxes": [[4.0, 4.0, 30.0, 30.0]]})
    (tmp_path / "manifest.json").write_text(json.dumps({"images": images}))
    spec = tmp_path / "run.json"
    spec.write_text(json.dumps({"corpus_manifest": "manifest.json",
                                "configs": ["Baseline", "ZeroOverlap", "LowerBound",
                                            "SmallerCropZeroOverlap"],
                                "seed": 1}))
    out = tmp_path / "out"
    report = json.loads(vd.score(spec, out, 2))
    assert len(report["configs"]) == 4
    assert (out / "report.json").exists()
    assert json.loads(vd.score(spec)) == report
    verdicts = json.loads(vd.range_rule(json.dumps(report)))
    assert "verdicts" in verdicts


def test_errors_are_value_errors():
    assert issubclass(vd.ViewdivError, ValueError)
    with pytest.raises(ValueError):
        vd.PairConfig("NoSuchKind")
