import numpy as np
import pytest

from evrestore.calibrate import (estimate_homography, estimate_temporal_offset,
                                 gradient_map, project, stack_event_frame)
from evrestore.errors import DegenerateGeometryError, ValidationError
from evrestore.events import EventStream
from evrestore.simulator import FrameSequence, SimulatorConfig, simulate_events

from oracles import apply_homography


def random_homography(rng):
    theta = np.deg2rad(rng.uniform(-10, 10))
    tx, ty = rng.uniform(-20, 20, 2)
    H = np.array([[np.cos(theta), -np.sin(theta), tx],
                  [np.sin(theta), np.cos(theta), ty],
                  [0.0, 0.0, 1.0]])
    H[2, :2] = rng.uniform(-1e-4, 1e-4, 2)  # mild projective terms
    return H


class TestHomography:
    def test_identity_from_exact_correspondences(self):
        pts = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [80.0, 90.0],
                        [30.0, 55.0]])
        res = estimate_homography(pts, pts, seed=0)
        np.testing.assert_allclose(res.homography, np.eye(3), atol=1e-9)

    def test_pure_translation(self):
        pts = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [80.0, 90.0]])
        dst = pts + np.array([5.0, -3.0])
        H = estimate_homography(pts, dst, seed=0).homography
        want = np.eye(3)
        want[0, 2], want[1, 2] = 5.0, -3.0
        np.testing.assert_allclose(H, want, atol=1e-9)

    def test_recovery_with_outliers(self):
        rng = np.random.default_rng(42)
        H_true = random_homography(rng)
        src = rng.uniform(0, 128, (50, 2))
        dst = apply_homography(H_true, src)
        n_out = 10
        dst[:n_out] += rng.uniform(20, 60, (n_out, 2))
        res = estimate_homography(src, dst, seed=0)
        corners = np.array([[0.0, 0.0], [128.0, 0.0], [0.0, 128.0],
                            [128.0, 128.0]])
        err = np.linalg.norm(project(res.homography, corners) -
                             apply_homography(H_true, corners), axis=1)
        assert err.max() < 0.5

    def test_scaling_equivariance(self):
        rng = np.random.default_rng(3)
        H_true = random_homography(rng)
        src = rng.uniform(0, 128, (30, 2))
        dst = apply_homography(H_true, src)
        H1 = estimate_homography(src, dst, seed=0).homography
        s = 4.0
        H2 = estimate_homography(s * src, s * dst, seed=0).homography
        S = np.diag([s, s, 1.0])
        conj = S @ H1 @ np.linalg.inv(S)
        np.testing.assert_allclose(H2 / H2[2, 2], conj / conj[2, 2], atol=1e-6)

    def test_too_few_matches_rejected(self):
        pts = np.zeros((3, 2))
        with pytest.raises(DegenerateGeometryError):
            estimate_homography(pts, pts)

    def test_low_inlier_ratio_rejected(self):
        rng = np.random.default_rng(5)
        src = rng.uniform(0, 100, (40, 2))
        dst = rng.uniform(0, 100, (40, 2))  # unrelated: no consistent model
        with pytest.raises(DegenerateGeometryError):
            estimate_homography(src, dst, seed=0, iterations=200,
                                inlier_threshold_px=0.5)


class TestStackAndGradient:
    def test_empty_window_zero_image(self):
        s = EventStream.from_events(4, 4, 0, 100, [(10, 1, 1, 1)])
        assert not stack_event_frame(s, (50, 90)).any()

    def test_normalized_counts(self):
        evs = [(10, 1, 1, 1), (20, 1, 1, -1), (30, 1, 1, 1), (40, 3, 2, 1)]
        s = EventStream.from_events(4, 4, 0, 100, evs)
        img = stack_event_frame(s, (0, 100))
        assert img[1, 1] == 1.0
        assert img[2, 3] == pytest.approx(1 / 3)

    def test_matches_histogram_oracle(self):
        rng = np.random.default_rng(6)
        n = 200
        t = np.sort(rng.integers(0, 1000, n)).astype(np.int64)
        x = rng.integers(0, 8, n).astype(np.int32)
        y = rng.integers(0, 8, n).astype(np.int32)
        p = rng.choice([-1, 1], n).astype(np.int8)
        s = EventStream(8, 8, 0, 1000, t, x, y, p)
        lo, hi = 200, 700
        hist = np.zeros((8, 8))
        for ti, xi, yi in zip(t, x, y):
            if lo <= ti <= hi:
                hist[yi, xi] += 1
        np.testing.assert_allclose(stack_event_frame(s, (lo, hi)),
                                   hist / hist.max())

    def test_gradient_constant_zero(self):
        assert not gradient_map(np.full((8, 8), 0.3)).any()

    def test_gradient_step_edge(self):
        img = np.zeros((8, 8))
        img[:, 4:] = 1.0
        g = gradient_map(img)
        assert g[:, 3:5].min() > 0
        assert not g[:, :3].any() and not g[:, 6:].any()

    def test_gradient_ramp_uniform_interior(self):
        img = np.tile(np.arange(8.0) * 0.1, (8, 1))
        g = gradient_map(img)
        np.testing.assert_allclose(g[:, 1:-1], 1.0)  # normalized by the peak


class TestTemporalOffset:
    def make_scene(self):
        # translating step edge on a 16x16 grid, 7 frames 10 ms apart
        frames = np.zeros((7, 16, 16))
        for i in range(7):
            frames[i, :, 2 + i:8 + i] = 0.8
        ts = (np.arange(7) * 10_000).astype(np.int64)
        seq = FrameSequence(frames, ts)
        stream = simulate_events(seq, SimulatorConfig(seed=0))
        return seq, stream

    def shift_stream(self, stream, delta):
        return EventStream(stream.width, stream.height,
                           stream.t_start + delta, stream.t_end + delta,
                           stream.t + delta, stream.x, stream.y, stream.p)

    def test_zero_shift_recovered(self):
        seq, stream = self.make_scene()
        res = estimate_temporal_offset(stream, seq, 20_000, 5_000)
        assert res.temporal_offset_us == 0

    def test_shift_and_recover(self):
        seq, stream = self.make_scene()
        for delta in (-15_000, 10_000, 25_000):
            shifted = self.shift_stream(stream, delta)
            res = estimate_temporal_offset(shifted, seq, 40_000, 5_000)
            assert abs(res.temporal_offset_us - delta) <= 5_000

    def test_recovered_score_is_maximal(self):
        seq, stream = self.make_scene()
        res = estimate_temporal_offset(stream, seq, 20_000, 5_000)
        for off in range(-20_000, 20_001, 5_000):
            shifted = self.shift_stream(stream, -off)
            probe = estimate_temporal_offset(shifted, seq, 1, 1)
            assert res.score >= probe.score - 1e-12

    def test_empty_stream_rejected(self):
        seq, _ = self.make_scene()
        with pytest.raises(ValidationError):
            estimate_temporal_offset(EventStream(16, 16, 0, 100), seq,
                                     10_000, 5_000)

    def test_geometry_mismatch_rejected(self):
        seq, stream = self.make_scene()
        big = FrameSequence(np.zeros((2, 32, 32)),
                            np.array([0, 10_000], np.int64))
        with pytest.raises(ValidationError):
            estimate_temporal_offset(stream, big, 10_000, 5_000)
