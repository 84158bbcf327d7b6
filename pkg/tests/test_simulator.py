import numpy as np
import pytest

from evrestore.dataset import SceneSpec, generate_scene
from evrestore.errors import GeometryError, ValidationError
from evrestore.simulator import (FrameSequence, SimulatorConfig,
                                 area_downsample, make_blur_mask,
                                 simulate_events, synthesize_blur)

from oracles import box_downsample, crossing_walk


def ramp_sequence(l0, l1, n=2, log_eps=1e-3, t_end=100_000):
    """Single-pixel sequence whose log intensity moves linearly l0 -> l1."""
    logs = np.linspace(l0, l1, n)
    frames = (np.exp(logs) - log_eps).reshape(n, 1, 1)
    ts = np.linspace(0, t_end, n).astype(np.int64)
    return FrameSequence(np.clip(frames, 0.0, 1.0), ts), logs, ts


class TestSimulateEvents:
    def test_constant_sequence_emits_nothing(self):
        seq = FrameSequence(np.full((3, 4, 4), 0.5),
                            np.array([0, 50, 100], np.int64))
        assert len(simulate_events(seq, SimulatorConfig())) == 0

    def test_single_frame_rejected(self):
        seq = FrameSequence(np.full((1, 4, 4), 0.5), np.array([0], np.int64))
        with pytest.raises(ValidationError):
            simulate_events(seq, SimulatorConfig())

    def test_unit_log_ramp_gives_five_positive_events(self):
        # log intensity climbs by exactly 1.0; C = 0.2 crosses 5 thresholds
        seq, logs, ts = ramp_sequence(np.log(0.101), np.log(0.101) + 1.0)
        stream = simulate_events(seq, SimulatorConfig(contrast_threshold=0.2))
        assert len(stream) == 5
        assert (stream.p == 1).all()
        want_t, want_p = crossing_walk(logs, ts, 0.2)
        assert list(stream.t) == want_t and list(stream.p) == want_p

    def test_random_ramps_match_step_walk_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            amp = rng.uniform(0.05, 2.0) * rng.choice([-1, 1])
            l0 = np.log(0.101)
            n = int(rng.integers(2, 6))
            seq, logs, ts = ramp_sequence(l0, l0 + amp, n=n)
            stream = simulate_events(seq, SimulatorConfig(contrast_threshold=0.2))
            want_t, want_p = crossing_walk(logs, ts, 0.2)
            assert list(stream.t) == want_t
            assert list(stream.p) == want_p

    def test_symmetric_up_down_ramp(self):
        l0 = np.log(0.101)
        logs = np.array([l0, l0 + 1.0, l0])
        frames = np.clip(np.exp(logs) - 1e-3, 0, 1).reshape(3, 1, 1)
        seq = FrameSequence(frames, np.array([0, 100, 200], np.int64))
        stream = simulate_events(seq, SimulatorConfig(contrast_threshold=0.2))
        assert (stream.p[:5] == 1).all() and (stream.p[5:] == -1).all()
        assert len(stream) == 10

    def test_intensity_reversal_negates_polarity(self):
        rng = np.random.default_rng(2)
        base = rng.uniform(0.2, 0.8, (4, 4))
        up = np.stack([base, np.clip(base * 2.0, 0, 1)])
        down = up[::-1].copy()
        ts = np.array([0, 100], np.int64)
        cfg = SimulatorConfig()
        s_up = simulate_events(FrameSequence(up, ts), cfg)
        s_down = simulate_events(FrameSequence(down, ts), cfg)
        assert len(s_up) == len(s_down)
        assert (s_up.p == 1).all() and (s_down.p == -1).all()

    def test_output_sorted_and_within_interval(self):
        rng = np.random.default_rng(9)
        frames = rng.uniform(0.1, 0.9, (5, 8, 8))
        ts = np.array([0, 10, 20, 30, 40], np.int64) * 1000
        stream = simulate_events(FrameSequence(frames, ts), SimulatorConfig())
        assert len(stream) > 0
        assert (np.diff(stream.t) >= 0).all()
        assert stream.t[0] >= 0 and stream.t[-1] <= 40_000


class TestBlurSynthesis:
    def test_identical_frames(self):
        f = np.random.default_rng(0).random((4, 4))
        seq = FrameSequence(np.stack([f] * 5), np.arange(5, dtype=np.int64))
        np.testing.assert_allclose(synthesize_blur(seq), f)

    def test_two_frame_mean(self):
        frames = np.stack([np.zeros((2, 2)), np.ones((2, 2))])
        seq = FrameSequence(frames, np.array([0, 1], np.int64))
        np.testing.assert_allclose(synthesize_blur(seq), 0.5)

    def test_permutation_invariant_and_bounded(self):
        rng = np.random.default_rng(4)
        frames = rng.random((7, 4, 4))
        ts = np.arange(7, dtype=np.int64)
        blur = synthesize_blur(FrameSequence(frames, ts))
        perm = rng.permutation(7)
        blur_p = synthesize_blur(FrameSequence(frames[perm], ts))
        np.testing.assert_allclose(blur, blur_p)
        assert (blur >= frames.min(axis=0) - 1e-12).all()
        assert (blur <= frames.max(axis=0) + 1e-12).all()

    def test_translating_box_mean_oracle(self):
        frames = np.zeros((7, 1, 12))
        for i in range(7):
            frames[i, 0, i:i + 4] = 1.0
        seq = FrameSequence(frames, np.arange(7, dtype=np.int64))
        np.testing.assert_allclose(synthesize_blur(seq), frames.mean(axis=0))


class TestBlurMask:
    def test_equal_inputs_zero_map(self):
        img = np.random.default_rng(1).random((4, 4))
        assert not make_blur_mask(img, img, 0.05).any()

    def test_threshold_passes_large_difference(self):
        b = np.full((4, 4), 0.6)
        s = np.full((4, 4), 0.2)
        np.testing.assert_allclose(make_blur_mask(b, s, 0.1), 0.4)

    def test_threshold_suppresses_small_difference(self):
        b = np.full((4, 4), 0.22)
        s = np.full((4, 4), 0.2)
        assert not make_blur_mask(b, s, 0.05).any()

    def test_geometry_mismatch_rejected(self):
        with pytest.raises(GeometryError):
            make_blur_mask(np.zeros((4, 4)), np.zeros((4, 5)), 0.05)

    def test_moving_edge_band(self, small_sample):
        # nonzero only where |blurry - sharp| clears the threshold
        sharp = small_sample.hr_sharp.frames[0]
        blur = small_sample.hr_blurry
        mask = make_blur_mask(blur, sharp, 0.05)
        d = np.abs(blur - sharp)
        np.testing.assert_array_equal(mask > 0, d >= 0.05)
        np.testing.assert_allclose(mask[mask > 0], d[d >= 0.05])


class TestAreaDownsample:
    def test_four_by_four_to_scalar_mean(self):
        img = np.arange(16, dtype=np.float64).reshape(4, 4)
        np.testing.assert_allclose(area_downsample(img, 4), [[img.mean()]])

    def test_two_stage_equals_direct(self):
        rng = np.random.default_rng(8)
        img = rng.random((8, 8))
        np.testing.assert_allclose(area_downsample(area_downsample(img, 2), 2),
                                   area_downsample(img, 4))

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(12)
        img = rng.random((8, 12))
        np.testing.assert_allclose(area_downsample(img, 2),
                                   box_downsample(img, 2))

    def test_non_divisible_rejected(self):
        with pytest.raises(GeometryError):
            area_downsample(np.zeros((6, 6)), 4)


class TestSceneStatistics:
    def test_hr_event_count_dominates_lr_on_average(self):
        ratios = []
        for seed in range(5):
            s = generate_scene(SceneSpec(height=32, width=32),
                               SimulatorConfig(seed=seed))
            ratios.append(len(s.hr_events) / max(len(s.lr_events), 1))
        assert np.mean(ratios) >= 1.0
