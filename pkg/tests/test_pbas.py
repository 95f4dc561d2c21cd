import numpy as np
import pytest

from rgbdseg.config import PipelineConfig
from rgbdseg.engine import SegmentationEngine
from rgbdseg.pbas import (
    PbasParams,
    adapt_R,
    adapt_T,
    classify_pixel_pbas,
    in_bounds_neighbors,
    make_pixel_model,
    pbas_distance,
    rgb_group_distance,
    update_model_pbas,
)

from reference import pbas_grid_arrays, reference_pbas_run


def _warm_model(params, sample):
    model = make_pixel_model(params)
    model.samples[:] = sample
    return model


class TestDistances:
    def test_identical_is_zero(self):
        assert pbas_distance(42, 42) == 0
        assert rgb_group_distance((10, 10, 10), (10, 10, 10)) == 0

    def test_group_distance_is_channel_max(self):
        assert rgb_group_distance((10, 10, 10), (10, 40, 10)) == 30
        assert rgb_group_distance((0, 5, 255), (3, 5, 250)) == 5

    def test_symmetric(self):
        assert pbas_distance(3, 200) == pbas_distance(200, 3) == 197


class TestClassify:
    def test_pixel_equal_to_all_samples(self):
        params = PbasParams()
        model = _warm_model(params, (10, 20, 30, 40))
        decision = classify_pixel_pbas((10, 20, 30, 40), model, params)
        assert not decision.foreground
        assert decision.dmin_rgb == 0
        assert decision.dmin_depth == 0
        assert decision.depth_evaluated

    def test_colour_camouflage_depth_detects(self):
        params = PbasParams()
        model = _warm_model(params, (10, 20, 30, 150))
        # RGB matches every sample; depth is 60 units off (beyond R_d = 18).
        decision = classify_pixel_pbas((10, 20, 30, 90), model, params)
        assert decision.bg_rgb
        assert decision.depth_evaluated and not decision.bg_depth
        assert decision.foreground
        assert decision.dmin_depth == 60

    def test_invalid_pixel_depth_gates_to_rgb(self):
        params = PbasParams()
        model = _warm_model(params, (10, 20, 30, 150))
        decision = classify_pixel_pbas((10, 20, 30, 0), model, params)
        assert not decision.depth_evaluated
        assert not decision.foreground

    def test_too_few_valid_samples_abstains(self):
        params = PbasParams()
        model = _warm_model(params, (10, 20, 30, 0))
        model.samples[0, 3] = 200  # only one valid stored depth < min_matches
        decision = classify_pixel_pbas((10, 20, 30, 90), model, params)
        assert not decision.depth_evaluated
        assert not decision.foreground

    def test_dmin_is_bruteforce_minimum(self):
        rng = np.random.default_rng(3)
        params = PbasParams()
        model = make_pixel_model(params)
        model.samples[:] = rng.integers(0, 256, size=(params.n, 4), dtype=np.uint8)
        model.samples[:, 3] |= 1
        x = tuple(int(v) for v in rng.integers(1, 256, size=4))
        decision = classify_pixel_pbas(x, model, params)
        rgb_dists = [rgb_group_distance(x, s) for s in model.samples]
        d_dists = [pbas_distance(x[3], s[3]) for s in model.samples if s[3] > 0]
        assert decision.dmin_rgb == min(rgb_dists)
        assert decision.dmin_depth == min(d_dists)


class TestAdaptation:
    def test_R_grows_when_close_to_scaled_average(self):
        params = PbasParams()
        model = make_pixel_model(params)
        model.r_rgb = 18.0
        adapt_R(model, 10.0, None, params)  # 18 < 50 -> grow 5%
        assert model.r_rgb == pytest.approx(18.9, abs=1e-12)

    def test_R_shrinks_when_large(self):
        params = PbasParams()
        model = make_pixel_model(params)
        model.r_rgb = 100.0
        adapt_R(model, 10.0, None, params)  # 100 > 50 -> shrink 5%
        assert model.r_rgb == pytest.approx(95.0, abs=1e-12)

    def test_R_floors_at_lower_bound(self):
        params = PbasParams()
        model = make_pixel_model(params)
        model.r_rgb = 18.0
        for _ in range(50):
            adapt_R(model, 0.0, None, params)
            assert model.r_rgb == 18.0  # decay is clamped at the floor

    def test_R_depth_group_independent(self):
        params = PbasParams()
        model = make_pixel_model(params)
        model.r_rgb, model.r_d = 30.0, 100.0
        adapt_R(model, 100.0, 10.0, params)
        assert model.r_rgb == pytest.approx(31.5)   # grows (30 < 500)
        assert model.r_d == pytest.approx(95.0)     # shrinks (100 > 50)

    def test_T_monotone_to_bounds(self):
        params = PbasParams()
        model = make_pixel_model(params)
        for _ in range(400):
            adapt_T(model, False, 1.0, params)
        assert model.t == params.t_lower
        for _ in range(400):
            adapt_T(model, True, 1.0, params)
        assert model.t == params.t_upper

    def test_T_epsilon_guard_at_zero_average(self):
        params = PbasParams()
        model = make_pixel_model(params)
        model.t = 50.0
        adapt_T(model, True, 0.0, params)
        assert model.t == pytest.approx(51.0, abs=1e-12)
        adapt_T(model, False, 0.0, params)
        assert model.t == pytest.approx(50.95, abs=1e-12)


class TestUpdate:
    def test_foreground_leaves_model_untouched(self):
        params = PbasParams()
        model = _warm_model(params, (1, 2, 3, 4))
        before = model.samples.copy()
        intent = update_model_pbas((9, 9, 9, 9), model, True, (0.0, 0.0, 0.0),
                                   params, [(0, 1)])
        assert intent is None
        np.testing.assert_array_equal(model.samples, before)

    def test_self_replacement_at_drawn_slot(self):
        params = PbasParams()
        model = _warm_model(params, (1, 2, 3, 4))
        model.t = 2.0  # p = 0.5
        # u0 = 0.2 < 0.5 fires; slot = int(0.2/0.5 * 20) = 8.
        intent = update_model_pbas((9, 8, 7, 6), model, False, (0.2, 0.9, 0.9),
                                   params, [(0, 1)])
        assert intent is None
        assert model.samples[8].tolist() == [9, 8, 7, 6]
        assert (model.samples[:8] == (1, 2, 3, 4)).all()

    def test_neighbor_intent_slot_and_choice(self):
        params = PbasParams()
        model = _warm_model(params, (1, 2, 3, 4))
        model.t = 2.0
        neighbors = [(0, 1), (1, 0), (1, 1)]  # corner pixel: 3 candidates
        # u1 = 0.4 < 0.5 fires; pick = int(0.4/0.5 * 3) = 2 -> (1, 1);
        # u2 = 0.31 -> slot int(0.31 * 20) = 6.
        intent = update_model_pbas((9, 8, 7, 6), model, False, (0.9, 0.4, 0.31),
                                   params, neighbors)
        assert intent == (1, 1, 6)

    def test_corner_neighbors_exhaustive_mapping(self):
        neighbors = in_bounds_neighbors(0, 0, 5, 5)
        assert neighbors == [(0, 1), (1, 0), (1, 1)]
        params = PbasParams()
        chosen = set()
        for i in range(30):
            model = _warm_model(params, (1, 2, 3, 4))
            model.t = 2.0
            u1 = (i + 0.5) / 30 * 0.5  # always below p, sweeps [0, p)
            intent = update_model_pbas((9, 9, 9, 9), model, False,
                                       (0.9, u1, 0.0), params, neighbors)
            chosen.add(intent[:2])
        assert chosen == set(neighbors)

    def test_interior_pixel_has_eight(self):
        assert len(in_bounds_neighbors(2, 2, 5, 5)) == 8
        assert len(in_bounds_neighbors(0, 2, 5, 5)) == 5


class TestKernelEquivalence:
    @pytest.mark.parametrize("mode", ["rgbd", "rgb_only"])
    @pytest.mark.parametrize("workers", [1, 3])
    def test_kernel_matches_scalar_reference(self, mode, workers):
        rng = np.random.default_rng(77)
        height, width = 7, 9
        params = PbasParams(n=5, min_matches=2)
        base = rng.integers(0, 220, size=(height, width, 4), dtype=np.uint8)
        frames = []
        for t in range(14):  # warm-up (5) plus plenty of live frames
            f = base.copy()
            if t >= 7:
                f[3:6, (t * 2) % width] = (255, 255, 255, 30)
            f[:, :, 3][rng.random((height, width)) < 0.25] = 0
            frames.append(f)

        seed = 1234
        ref_masks, ref_grid = reference_pbas_run(frames, params, mode, seed)

        config = PipelineConfig(algorithm="pbas", mode=mode, pbas=params,
                                seed=seed, workers=workers)
        with SegmentationEngine(config, width, height) as engine:
            for t, frame in enumerate(frames):
                mask = engine.process_frame(frame)
                np.testing.assert_array_equal(mask, ref_masks[t], err_msg=f"frame {t}")
            got = engine.state_arrays()
        expected = pbas_grid_arrays(ref_grid, params)
        for key in expected:
            np.testing.assert_array_equal(got[key], expected[key], err_msg=key)

    def test_thread_counts_bit_identical(self):
        rng = np.random.default_rng(41)
        height, width = 15, 21
        frames = [rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
                  for _ in range(30)]
        results = {}
        for workers in (1, 4):
            config = PipelineConfig(algorithm="pbas", mode="rgbd", seed=5, workers=workers)
            with SegmentationEngine(config, width, height) as engine:
                masks = [engine.process_frame(f).copy() for f in frames]
                results[workers] = (masks, {k: v.copy() for k, v in engine.state_arrays().items()})
        for a, b in zip(results[1][0], results[4][0]):
            np.testing.assert_array_equal(a, b)
        for key in results[1][1]:
            np.testing.assert_array_equal(results[1][1][key], results[4][1][key])

    def test_warmup_then_constant_is_background(self):
        params = PbasParams()
        height, width = 6, 8
        frame = np.full((height, width, 4), 77, dtype=np.uint8)
        config = PipelineConfig(algorithm="pbas", mode="rgbd", pbas=params)
        with SegmentationEngine(config, width, height) as engine:
            masks = [engine.process_frame(frame) for _ in range(params.n + 10)]
            state = engine.state_arrays()
        assert all(int(m.sum()) == 0 for m in masks)
        # After warm-up on constant input every stored sample equals the pixel.
        assert (state["samples"] == 77).all()

    def test_bounds_hold_every_frame(self):
        rng = np.random.default_rng(6)
        params = PbasParams()
        height, width = 10, 12
        config = PipelineConfig(algorithm="pbas", mode="rgbd", seed=2)
        with SegmentationEngine(config, width, height) as engine:
            for _ in range(60):
                frame = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
                engine.process_frame(frame)
                state = engine.state_arrays()
                assert (state["r_rgb"] >= params.r_lower).all()
                assert (state["r_d"] >= params.r_lower).all()
                assert (state["t"] >= params.t_lower).all()
                assert (state["t"] <= params.t_upper).all()

    def test_all_invalid_depth_equals_rgb_only(self):
        rng = np.random.default_rng(51)
        height, width = 9, 13
        frames = []
        for _ in range(30):
            f = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
            f[:, :, 3] = 0
            frames.append(f)
        masks = {}
        for mode in ("rgbd", "rgb_only"):
            config = PipelineConfig(algorithm="pbas", mode=mode, seed=3)
            with SegmentationEngine(config, width, height) as engine:
                masks[mode] = [engine.process_frame(f).copy() for f in frames]
        for a, b in zip(masks["rgbd"], masks["rgb_only"]):
            np.testing.assert_array_equal(a, b)
