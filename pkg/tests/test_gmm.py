import math

import mpmath
import numpy as np
import pytest

from rgbdseg.config import PipelineConfig
from rgbdseg.engine import SegmentationEngine
from rgbdseg.gmm import (
    GaussianComponent,
    GmmParams,
    classify_pixel,
    density,
    gmm_pixel_step,
    make_pixel_model,
    match_component,
    update_pixel,
)

from reference import gmm_grid_arrays, reference_gmm_run


def _comp(weight, mean, variance):
    return GaussianComponent(weight, np.asarray(mean, dtype=np.float64), variance)


def _density_reference(d, v, s):
    """High-precision density via mpmath (50 digits), rounded to float."""
    with mpmath.workdps(50):
        val = mpmath.mpf(s) / (2 * mpmath.pi * mpmath.mpf(v)) * mpmath.e ** (
            -(mpmath.mpf(d) ** 2) / (2 * mpmath.mpf(v))
        )
        return float(val)


class TestDensity:
    def test_at_mean_with_v100(self):
        comp = _comp(1.0, [10.0], 100.0)
        # 10000 / (2 pi 100) = 15.91549...
        assert density([10.0], comp, 10000.0) == pytest.approx(
            15.915494309189535, rel=1e-14
        )

    def test_at_mean_general(self):
        for v in (1.0, 37.5, 225.0, 2500.0):
            comp = _comp(1.0, [0.0, 0.0, 0.0], v)
            assert density([0.0, 0.0, 0.0], comp, 10000.0) == pytest.approx(
                10000.0 / (2.0 * math.pi * v), rel=1e-14
            )

    def test_large_distance_vanishes(self):
        v = 4.0
        comp = _comp(1.0, [0.0], v)
        d = math.sqrt(100.0 * v)  # d^2 = 100 v
        bound = (10000.0 / (2.0 * math.pi * v)) * math.exp(-50.0)
        assert density([d], comp, 10000.0) <= bound * (1 + 1e-12)

    def test_against_mpmath_spot_grid(self):
        for d in (0.0, 3.0, 55.5, 200.0, 400.0):
            for v in (1.0, 100.0, 777.0, 2500.0):
                comp = _comp(1.0, [0.0], v)
                ref = _density_reference(d, v, 10000.0)
                got = density([d], comp, 10000.0)
                if ref >= 2.0 ** -1022:
                    assert abs(got - ref) / ref < 1e-12
                else:
                    assert abs(got - ref) < 1e-12 * 2.0 ** -1022

    def test_strictly_decreasing_in_distance(self):
        comp = _comp(1.0, [0.0], 50.0)
        values = [density([d], comp, 10000.0) for d in np.linspace(0, 80, 50)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestMatchComponent:
    def test_exact_mean_matches(self):
        comps = [_comp(1.0, [5.0, 5.0, 5.0], 100.0)]
        assert match_component([5.0, 5.0, 5.0], comps, 2.5) == 0

    def test_no_match_when_far(self):
        comps = [_comp(0.6, [0.0], 4.0), _comp(0.4, [10.0], 4.0)]
        # Gate is 2.5 * sigma = 5; 100 is far from both means.
        assert match_component([100.0], comps, 2.5) is None

    def test_heaviest_wins_and_ties_go_low(self):
        a = _comp(0.3, [0.0], 100.0)
        b = _comp(0.7, [1.0], 100.0)
        assert match_component([0.5], [a, b], 2.5) == 1
        assert match_component([0.5], [b, a], 2.5) == 0
        tie = [_comp(0.5, [0.0], 100.0), _comp(0.5, [1.0], 100.0)]
        assert match_component([0.5], tie, 2.5) == 0

    def test_unseeded_components_never_match(self):
        comps = [_comp(0.0, [0.0], 225.0), _comp(1.0, [50.0], 225.0)]
        # x sits right on the unseeded slot's mean; it must not match, and
        # the seeded component is outside its gate (2.5 * 15 = 37.5 < 40).
        assert match_component([10.0], comps, 2.5) is None
        assert match_component([50.0], comps, 2.5) == 1


class TestClassifyPixel:
    def test_dominant_mean_is_background(self):
        params = GmmParams()
        model = make_pixel_model(params)
        model.rgb[0] = _comp(1.0, [10.0, 20.0, 30.0], 100.0)
        fg, score = classify_pixel([10.0, 20.0, 30.0], 0, model, params)
        assert not fg
        assert score == pytest.approx(10000.0 / (2.0 * math.pi * 100.0), rel=1e-12)

    def test_depth_mismatch_flips_product(self):
        params = GmmParams()
        model = make_pixel_model(params)
        model.rgb[0] = _comp(1.0, [10.0, 20.0, 30.0], 100.0)
        model.depth[0] = _comp(1.0, [100.0], 100.0)
        # Depth far off: the product collapses below tau.
        fg, score = classify_pixel([10.0, 20.0, 30.0], 250, model, params)
        p_rgb = 1.0 * density([10.0, 20.0, 30.0], model.rgb[0], params.s)
        p_d = 1.0 * density([250.0], model.depth[0], params.s)
        assert score == pytest.approx(p_rgb * p_d, rel=1e-12)
        assert fg

    def test_invalid_depth_equals_rgb_only(self):
        params = GmmParams()
        model = make_pixel_model(params)
        model.rgb[0] = _comp(1.0, [1.0, 2.0, 3.0], 50.0)
        model.depth[0] = _comp(1.0, [99.0], 50.0)
        fg0, s0 = classify_pixel([1.0, 2.0, 3.0], 0, model, params)
        p_rgb = density([1.0, 2.0, 3.0], model.rgb[0], params.s)
        assert s0 == p_rgb
        assert not fg0

    def test_unseeded_depth_falls_back_to_rgb(self):
        params = GmmParams()
        model = make_pixel_model(params)
        model.rgb[0] = _comp(1.0, [1.0, 2.0, 3.0], 50.0)
        # Depth still unseeded: a valid reading must not zero the score.
        fg, score = classify_pixel([1.0, 2.0, 3.0], 128, model, params)
        assert not fg
        assert score > 0


class TestUpdatePixel:
    def test_weight_recurrence_hand_example(self):
        params = GmmParams(k_rgb=2, alpha=0.001)
        model = make_pixel_model(params)
        model.rgb[0] = _comp(0.5, [0.0, 0.0, 0.0], 100.0)
        model.rgb[1] = _comp(0.5, [200.0, 200.0, 200.0], 100.0)
        update_pixel([0.0, 0.0, 0.0], 0, model, params)
        assert model.rgb[0].weight == pytest.approx(0.5005, abs=1e-12)
        assert model.rgb[1].weight == pytest.approx(0.4995, abs=1e-12)

    def test_constant_input_weight_approaches_one(self):
        params = GmmParams(k_rgb=3, alpha=0.01)
        model = make_pixel_model(params)
        model.rgb[0] = _comp(0.4, [5.0, 5.0, 5.0], 100.0)
        model.rgb[1] = _comp(0.3, [150.0, 150.0, 150.0], 100.0)
        model.rgb[2] = _comp(0.3, [250.0, 250.0, 250.0], 100.0)
        last = model.rgb[0].weight
        for _ in range(200):
            update_pixel([5.0, 5.0, 5.0], 0, model, params)
            assert model.rgb[0].weight > last
            last = model.rgb[0].weight
        assert last > 0.85

    def test_no_match_replaces_least_fit(self):
        params = GmmParams(k_rgb=3, w_init=0.05, var_init=225.0)
        model = make_pixel_model(params)
        # Fitness w/sqrt(v): comp1 is least fit (0.1/sqrt(400) = 0.005).
        model.rgb[0] = _comp(0.6, [0.0, 0.0, 0.0], 100.0)
        model.rgb[1] = _comp(0.1, [50.0, 50.0, 50.0], 400.0)
        model.rgb[2] = _comp(0.3, [200.0, 200.0, 200.0], 100.0)
        update_pixel([120.0, 120.0, 120.0], 0, model, params)
        assert model.rgb[1].mean.tolist() == [120.0, 120.0, 120.0]
        assert model.rgb[1].variance == params.var_init
        total = sum(c.weight for c in model.rgb)
        assert total == pytest.approx(1.0, abs=1e-12)
        assert model.rgb[1].weight == pytest.approx(0.05 / (0.6 + 0.1 + 0.3 - 0.1 + 0.05), rel=1e-9)

    def test_matched_mean_variance_blend(self):
        params = GmmParams(k_rgb=1, alpha=0.5)
        model = make_pixel_model(params)
        model.rgb[0] = _comp(1.0, [10.0, 10.0, 10.0], 16.0)
        update_pixel([12.0, 10.0, 10.0], 0, model, params)
        # mean blends halfway; variance blends toward d^2 = 4.
        assert model.rgb[0].mean.tolist() == [11.0, 10.0, 10.0]
        assert model.rgb[0].variance == pytest.approx(0.5 * 16.0 + 0.5 * 4.0)

    def test_invariants_over_random_sweep(self):
        rng = np.random.default_rng(5)
        params = GmmParams()
        model = make_pixel_model(params)
        gmm_pixel_step(rng.integers(0, 256, 3).astype(float), 7, model, params)
        for _ in range(300):
            x = rng.integers(0, 256, 3).astype(float)
            d = int(rng.integers(0, 256))
            update_pixel(x, d, model, params)
            for comps in (model.rgb, model.depth):
                total = sum(c.weight for c in comps)
                assert total == pytest.approx(1.0, abs=1e-9)
                assert all(c.variance >= 1.0 for c in comps)


class TestPixelStep:
    def test_first_frame_is_background(self):
        params = GmmParams()
        model = make_pixel_model(params)
        fg, score = gmm_pixel_step([40.0, 80.0, 120.0], 200, model, params)
        assert not fg
        expected = (10000.0 / (2.0 * math.pi * 225.0)) ** 2
        assert score == pytest.approx(expected, rel=1e-12)

    def test_depth_seeds_on_first_valid_reading(self):
        params = GmmParams()
        model = make_pixel_model(params)
        gmm_pixel_step([1.0, 2.0, 3.0], 0, model, params)
        assert model.depth[0].weight == 0.0
        gmm_pixel_step([1.0, 2.0, 3.0], 77, model, params)
        assert model.depth[0].weight == 1.0
        assert model.depth[0].mean[0] == 77.0


class TestKernelEquivalence:
    @pytest.mark.parametrize("mode", ["rgbd", "rgb_only"])
    @pytest.mark.parametrize("workers", [1, 3])
    def test_kernel_matches_scalar_reference(self, mode, workers):
        rng = np.random.default_rng(21)
        height, width = 9, 11
        # Mix of smooth background, moving blob and invalid depth.
        frames = []
        base = rng.integers(0, 200, size=(height, width, 4), dtype=np.uint8)
        for t in range(8):
            f = base.copy()
            f[2:5, t % width] = (250, 250, 250, 200)
            f[:, :, 3][rng.random((height, width)) < 0.2] = 0
            frames.append(f)

        params = GmmParams(k_rgb=3, k_d=2)
        ref_masks, ref_grid = reference_gmm_run(frames, params, mode)

        config = PipelineConfig(algorithm="gmm", mode=mode, gmm=params, workers=workers)
        with SegmentationEngine(config, width, height) as engine:
            for t, frame in enumerate(frames):
                mask = engine.process_frame(frame)
                np.testing.assert_array_equal(mask, ref_masks[t], err_msg=f"frame {t}")
            got = engine.state_arrays()
        expected = gmm_grid_arrays(ref_grid, params)
        for key in expected:
            np.testing.assert_array_equal(got[key], expected[key], err_msg=key)

    def test_thread_counts_bit_identical(self):
        rng = np.random.default_rng(31)
        height, width = 16, 24
        frames = [rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
                  for _ in range(6)]
        results = {}
        for workers in (1, 8):
            config = PipelineConfig(algorithm="gmm", mode="rgbd", workers=workers)
            with SegmentationEngine(config, width, height) as engine:
                masks = [engine.process_frame(f).copy() for f in frames]
                results[workers] = (masks, {k: v.copy() for k, v in engine.state_arrays().items()})
        for a, b in zip(results[1][0], results[8][0]):
            np.testing.assert_array_equal(a, b)
        for key in results[1][1]:
            np.testing.assert_array_equal(results[1][1][key], results[8][1][key])

    def test_burn_in_constant_scene_stays_background(self):
        height, width = 6, 7
        frame = np.full((height, width, 4), 90, dtype=np.uint8)
        config = PipelineConfig(algorithm="gmm", mode="rgbd")
        with SegmentationEngine(config, width, height) as engine:
            masks = [engine.process_frame(frame) for _ in range(100)]
        assert all(int(m.sum()) == 0 for m in masks)
