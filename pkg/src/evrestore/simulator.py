"""Threshold-crossing event simulation and blur synthesis from frame sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ValidationError
from .events import EventStream

# Slack for deciding that a log-intensity excursion reaches a threshold
# multiple despite floating-point rounding (e.g. 1.0 / 0.2 == 4.999...).
_CROSSING_EPS = 1e-9


@dataclass(frozen=True)
class FrameSequence:
    """Ordered grayscale frames with strictly increasing timestamps."""

    frames: np.ndarray      # (n, H, W) float in [0, 1]
    timestamps: np.ndarray  # (n,) int64 microseconds

    def __post_init__(self):
        if self.frames.ndim != 3:
            raise ValueError("frames must be a (n, H, W) array")
        if len(self.frames) != len(self.timestamps):
            raise ValueError("one timestamp per frame required")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.frames.size and (self.frames.min() < 0 or self.frames.max() > 1):
            raise ValueError("frame values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class SimulatorConfig:
    contrast_threshold: float = 0.2   # log-intensity step per event
    log_eps: float = 1e-3             # log(I + eps) regularizer
    threshold_jitter: float = 0.0     # relative stddev of per-pixel threshold noise
    seed: int = 0

    def __post_init__(self):
        if self.contrast_threshold <= 0:
            raise ValidationError("contrast_threshold must be > 0")
        if self.log_eps <= 0:
            raise ValidationError("log_eps must be > 0")


def simulate_events(seq: FrameSequence, cfg: SimulatorConfig) -> EventStream:
    """Emit one event per contrast-threshold crossing of the per-pixel log intensity.

    Between consecutive frames the log intensity is interpolated linearly;
    each crossing of the reference level +/- C produces an event timestamped
    by linear interpolation and advances the reference by +/- C.
    """
    if len(seq) < 2:
        raise ValidationError("event simulation needs at least two frames")
    h, w = seq.height, seq.width
    log_frames = np.log(seq.frames.astype(np.float64) + cfg.log_eps)

    if cfg.threshold_jitter > 0:
        rng = np.random.default_rng(cfg.seed)
        jitter = 1.0 + cfg.threshold_jitter * rng.standard_normal((h, w))
        thresh = cfg.contrast_threshold * np.clip(jitter, 0.1, None)
    else:
        thresh = np.full((h, w), cfg.contrast_threshold)

    ref = log_frames[0].copy()
    ts_list, xs_list, ys_list, ps_list = [], [], [], []
    for i in range(1, len(seq)):
        l0, l1 = log_frames[i - 1], log_frames[i]
        t0, t1 = int(seq.timestamps[i - 1]), int(seq.timestamps[i])
        delta = l1 - ref
        sign = np.sign(delta).astype(np.int8)
        n_cross = np.floor(np.abs(delta) / thresh + _CROSSING_EPS).astype(np.int64)
        n_cross[sign == 0] = 0
        if not n_cross.any():
            continue
        slope = l1 - l0
        max_n = int(n_cross.max())
        for k in range(1, max_n + 1):
            ys, xs = np.nonzero(n_cross >= k)
            level = ref[ys, xs] + sign[ys, xs] * k * thresh[ys, xs]
            sl = slope[ys, xs]
            frac = np.where(sl != 0, (level - l0[ys, xs]) / np.where(sl != 0, sl, 1.0), 1.0)
            frac = np.clip(frac, 0.0, 1.0)
            ts_list.append(np.rint(t0 + frac * (t1 - t0)).astype(np.int64))
            xs_list.append(xs.astype(np.int32))
            ys_list.append(ys.astype(np.int32))
            ps_list.append(sign[ys, xs])
        ref += sign * n_cross * thresh

    t_start, t_end = int(seq.timestamps[0]), int(seq.timestamps[-1])
    if not ts_list:
        return EventStream(w, h, t_start, t_end)
    t = np.concatenate(ts_list)
    order = np.argsort(t, kind="stable")
    return EventStream(w, h, t_start, t_end,
                       t[order], np.concatenate(xs_list)[order],
                       np.concatenate(ys_list)[order], np.concatenate(ps_list)[order])


def synthesize_blur(seq: FrameSequence) -> np.ndarray:
    """Pixelwise mean of all frames."""
    if len(seq) < 1:
        raise ValidationError("blur synthesis needs at least one frame")
    return seq.frames.astype(np.float64).mean(axis=0)


def make_blur_mask(blurry: np.ndarray, sharp: np.ndarray,
                   threshold: float = 0.05) -> np.ndarray:
    """Thresholded absolute blurry-sharp difference, clamped to [0, 1]."""
    if blurry.shape != sharp.shape:
        raise GeometryError(f"geometry mismatch {blurry.shape} vs {sharp.shape}")
    if not 0 <= threshold < 1:
        raise ValidationError(f"threshold must be in [0, 1), got {threshold}")
    d = np.abs(blurry.astype(np.float64) - sharp.astype(np.float64))
    d[d < threshold] = 0.0
    return np.clip(d, 0.0, 1.0)


def area_downsample(image: np.ndarray, factor: int) -> np.ndarray:
    """Box-filter downsampling by an integer factor (last two axes)."""
    if factor == 1:
        return image.copy()
    *lead, h, w = image.shape
    if h % factor or w % factor:
        raise GeometryError(f"geometry {h}x{w} not divisible by {factor}")
    shape = (*lead, h // factor, factor, w // factor, factor)
    return image.reshape(shape).mean(axis=(-3, -1))
