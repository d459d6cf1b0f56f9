import numpy as np
import pytest

import berrygan as bg


def test_quantize_boundaries():
    assert bg.quantize_value(0) == 0
    assert bg.quantize_value(50) == 0
    assert bg.quantize_value(51) == 127
    assert bg.quantize_value(180) == 127
    assert bg.quantize_value(181) == 255
    assert bg.quantize_value(255) == 255
    with pytest.raises(ValueError):
        bg.quantize_value(300)
    raw = np.arange(256, dtype=np.uint8).reshape(16, 16)
    q = bg.quantize_mask(raw)
    assert set(np.unique(q)) <= {0, 127, 255}


def test_scene_generation_is_deterministic():
    img1, mask1, count1 = bg.generate_scene(seed=7)
    img2, mask2, count2 = bg.generate_scene(seed=7)
    assert np.array_equal(img1, img2)
    assert np.array_equal(mask1, mask2)
    assert count1 == count2
    assert count1 > 0
    assert set(np.unique(mask1)) <= {bg.BACKGROUND, bg.BERRY_EDGE, bg.BERRY}
    img3, _, _ = bg.generate_scene(seed=8)
    assert not np.array_equal(img1, img3)


def test_leaf_bank_split():
    bank = bg.make_leaf_bank()
    assert len(bank) == 24
    assert sum(1 for leaf in bank if leaf["split"] == "train") == 18
    for leaf in bank:
        assert leaf["footprint"].any()


def test_pairs_reocclude_round_trip():
    pairs = bg.build_pairs(split="train", multiplicity=3, target_pairs=4)
    assert len(pairs) == 4
    for pair in pairs:
        occ = pair["occluded_mask"]
        non = pair["nonoccluded_mask"]
        fp = pair["footprint"]
        assert fp.any()
        assert np.array_equal(occ[~fp], non[~fp])
        assert not (occ[fp] == bg.BERRY).any()
        assert np.array_equal(bg.reocclude(non, fp), occ)


def test_counting_on_a_simple_layout():
    mask = np.zeros((48, 48), np.uint8)
    yy, xx = np.mgrid[0:48, 0:48]
    for cx, cy in ((14, 14), (33, 33)):
        d = np.hypot(xx - cx, yy - cy)
        mask[(d > 7) & (d <= 9)] = bg.BERRY_EDGE
        mask[d <= 7] = bg.BERRY
    rep = bg.count_berries(mask)
    assert rep["raw_components"] == 2
    assert rep["accepted"] == 2
    stats = bg.berry_stats(mask)
    assert len(stats) == 2
    for area, diameter in stats:
        assert area > 100
        assert abs(diameter - 2 * np.sqrt(area / np.pi)) < 1e-9


def test_metrics_match_worked_values():
    r2, slope, intercept = bg.r_squared([12, 18, 33], [10, 20, 30])
    assert abs(r2 - 0.915) < 1e-12
    assert slope > 0

    a = np.full((10, 10), bg.BERRY, np.uint8)
    b = np.full((10, 10), bg.BERRY, np.uint8)
    b[:5] = bg.BACKGROUND
    assert bg.iou(a, a, bg.BERRY) == 1.0
    assert abs(bg.iou(a, b, bg.BERRY) - 0.5) < 1e-12
    assert bg.pearson(a, a) is None  # constant input has no correlation
    m = bg.generation_map(a, b, "three_class")
    assert m.shape == (10, 10, 3)


def test_helmert_recovery():
    rng = np.random.default_rng(5)
    s, th, tx, ty = 1.7, 0.6, 4.0, -2.5
    a, b = s * np.cos(th), s * np.sin(th)
    src = rng.uniform(-50, 50, (6, 2))
    dst = np.stack(
        [tx + a * src[:, 0] - b * src[:, 1], ty + b * src[:, 0] + a * src[:, 1]], axis=1
    )
    fit = bg.estimate_helmert(src, dst)
    assert abs(fit["tx"] - tx) < 1e-9
    assert abs(fit["ty"] - ty) < 1e-9
    assert abs(fit["scale"] - s) < 1e-9
    assert abs(fit["theta"] - th) < 1e-9
    assert fit["rms_x"] < 1e-9

    img = (np.arange(64, dtype=np.uint8).reshape(8, 8) * 3).astype(np.uint8)
    identity = {"tx": 0.0, "ty": 0.0, "scale": 1.0, "theta": 0.0}
    assert np.array_equal(bg.apply_helmert(identity, img), img)


def test_patch_extraction_and_resize():
    img = np.zeros((656, 818), np.uint8)
    mask = np.zeros((656, 818), np.uint8)
    patches = bg.extract_patches(img, mask)
    assert len(patches) == 2
    assert [p["origin_x"] for p in patches] == [0, 162]
    small = bg.resize_nearest(patches[0]["mask"], 286, is_mask=True)
    assert small.shape == (286, 286)


def test_recipe_smoke(tmp_path):
    cfg = {
        "train_scenes": 4,
        "test_scenes": 2,
        "pairs_per_scene_train": 2,
        "pairs_per_scene_test": 1,
        "epochs": 2,
        "map_limit": 1,
    }
    wd = tmp_path / "wd"
    res = bg.run_recipe("exp2", str(wd), cfg)
    assert res["name"] == "exp2"
    stats = res["stats"]
    assert "la.r2_generated" in stats
    assert "la.mean_corr_occ" in stats
    assert stats["la.patches"] >= 1
    assert (wd / "pairs" / "test.jsonl").exists()
    assert (wd / "models" / "la.ckpt").exists()
    assert (wd / "reports" / "la" / "corr_occ_hist_test.csv").exists()
    assert (wd / "reports" / "exp2_stats.csv").exists()
    with pytest.raises(ValueError):
        bg.run_recipe("exp9", str(tmp_path / "other"), cfg)
