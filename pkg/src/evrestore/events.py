"""Event stream data model and dense representations.

An event stream is a time-sorted list of (t, x, y, p) tuples with a fixed
sensor geometry and exposure interval. Dense encodings (voxel grids, event
masks) are plain numpy arrays of shape (channels, H, W) or (H, W).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import torch
import torch.nn.functional as F

from .errors import GeometryError, TimeRangeError


class Event(NamedTuple):
    t: int  # microseconds since stream epoch
    x: int
    y: int
    p: int  # polarity, -1 or +1


@dataclass(frozen=True)
class EventStream:
    """Timestamp-sorted polarity events with sensor geometry.

    Arrays are shared, not copied; treat them as immutable.
    """

    width: int
    height: int
    t_start: int
    t_end: int
    t: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    x: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    y: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    p: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"invalid sensor geometry {self.width}x{self.height}")
        if self.t_end < self.t_start:
            raise TimeRangeError(f"t_end {self.t_end} < t_start {self.t_start}")
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event field arrays must have equal length")
        if n:
            if np.any(np.diff(self.t) < 0):
                raise ValueError("event timestamps must be non-decreasing")
            if self.t[0] < self.t_start or self.t[-1] > self.t_end:
                raise TimeRangeError("event timestamps outside exposure interval")
            if np.any(self.x < 0) or np.any(self.x >= self.width) or \
               np.any(self.y < 0) or np.any(self.y >= self.height):
                raise GeometryError("event coordinates outside sensor geometry")
            if not np.all(np.abs(self.p) == 1):
                raise ValueError("polarity must be -1 or +1")

    @classmethod
    def from_events(cls, width: int, height: int, t_start: int, t_end: int,
                    events: Iterable[tuple]) -> "EventStream":
        ev = sorted(events, key=lambda e: e[0])
        t = np.array([e[0] for e in ev], np.int64)
        x = np.array([e[1] for e in ev], np.int32)
        y = np.array([e[2] for e in ev], np.int32)
        p = np.array([e[3] for e in ev], np.int8)
        return cls(width, height, t_start, t_end, t, x, y, p)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start


def downsample_events(stream: EventStream, rho: int) -> EventStream:
    """Spatially downsample a stream by integer factor rho.

    Coordinates map by floor division; timestamps, polarities, count and
    ordering are preserved. Colliding events are kept, not merged.
    """
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if stream.width % rho or stream.height % rho:
        raise GeometryError(
            f"geometry {stream.width}x{stream.height} not divisible by rho={rho}")
    if rho == 1:
        return stream
    return EventStream(stream.width // rho, stream.height // rho,
                       stream.t_start, stream.t_end,
                       stream.t, stream.x // rho, stream.y // rho, stream.p)


def slice_window(stream: EventStream, t: int, delta_t: int) -> EventStream:
    """Extract events with |t_i - t| <= delta_t / 2.

    The output interval is the window clipped to the stream's exposure.
    """
    if t < stream.t_start or t > stream.t_end:
        raise TimeRangeError(
            f"t={t} outside exposure interval [{stream.t_start}, {stream.t_end}]")
    half = delta_t / 2.0
    lo = max(stream.t_start, int(np.ceil(t - half)))
    hi = min(stream.t_end, int(np.floor(t + half)))
    keep = (stream.t.astype(np.float64) >= t - half) & (stream.t.astype(np.float64) <= t + half)
    return EventStream(stream.width, stream.height, lo, max(lo, hi),
                       stream.t[keep], stream.x[keep], stream.y[keep], stream.p[keep])


def encode_voxel_grid(stream: EventStream, bins: int) -> np.ndarray:
    """Encode a stream into a signed voxel grid of shape (bins, H, W).

    Each event spreads its polarity over the two temporally adjacent bins
    with bilinear weights: contribution p * max(0, 1 - |b - t*|) with
    t* = (bins - 1) * (t - t_start) / duration. Zero-duration streams put
    all mass into bin 0.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    grid = np.zeros((bins, stream.height, stream.width), np.float64)
    n = len(stream)
    if n == 0:
        return grid
    if stream.duration > 0:
        ts = (bins - 1) * (stream.t - stream.t_start).astype(np.float64) / stream.duration
    else:
        ts = np.zeros(n, np.float64)
    pol = stream.p.astype(np.float64)
    lo = np.floor(ts).astype(np.int64)
    frac = ts - lo
    flat = grid.reshape(bins, -1)
    idx = stream.y.astype(np.int64) * stream.width + stream.x.astype(np.int64)
    valid = (lo >= 0) & (lo < bins)
    np.add.at(flat, (lo[valid], idx[valid]), pol[valid] * (1.0 - frac[valid]))
    hi = lo + 1
    valid = (hi >= 0) & (hi < bins) & (frac > 0)
    np.add.at(flat, (hi[valid], idx[valid]), pol[valid] * frac[valid])
    return grid


def build_representation(stream: EventStream, t: int,
                         delta_t_fraction: float = 0.2,
                         bins: int = 8) -> np.ndarray:
    """Concatenate the time-windowed and entire-exposure voxel grids.

    Returns a (2 * bins, H, W) array: the first half encodes the events in a
    window of delta_t_fraction * duration centered on t, the second half the
    whole stream.
    """
    if not 0 < delta_t_fraction <= 1:
        raise ValueError(f"delta_t_fraction must be in (0, 1], got {delta_t_fraction}")
    window = slice_window(stream, t, int(round(delta_t_fraction * stream.duration)))
    local = encode_voxel_grid(window, bins)
    entire = encode_voxel_grid(stream, bins)
    return np.concatenate([local, entire], axis=0)


def event_mask(stream: EventStream) -> np.ndarray:
    """Per-pixel weight map: 1.0 where at least one event fired, 0.1 elsewhere."""
    hit = np.zeros((stream.height, stream.width), bool)
    hit[stream.y, stream.x] = True
    return np.where(hit, 1.0, 0.1)


def rescale_tensor(tensor: np.ndarray, factor: float) -> np.ndarray:
    """Channel-wise bilinear resampling (align_corners=False) by a real factor."""
    if factor <= 0:
        raise ValueError(f"factor must be > 0, got {factor}")
    if tensor.ndim == 2:
        return rescale_tensor(tensor[None], factor)[0]
    c, h, w = tensor.shape
    out_h, out_w = h * factor, w * factor
    if abs(out_h - round(out_h)) > 1e-9 or abs(out_w - round(out_w)) > 1e-9:
        raise GeometryError(f"factor {factor} gives non-integral dims for {h}x{w}")
    out_h, out_w = int(round(out_h)), int(round(out_w))
    if (out_h, out_w) == (h, w):
        return tensor.copy()
    x = torch.from_numpy(np.ascontiguousarray(tensor, np.float64))[None]
    y = F.interpolate(x, size=(out_h, out_w), mode="bilinear", align_corners=False)
    return y[0].numpy()
