"""Spatio-temporal alignment of an event stream to a frame stream.

Spatial alignment is a RANSAC homography over point correspondences
(normalized DLT hypotheses, inlier refit). Temporal alignment scans a
candidate offset grid maximizing SSIM between stacked event frames and
frame gradient maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, ValidationError
from .events import EventStream
from .metrics import ssim
from .simulator import FrameSequence


@dataclass(frozen=True)
class CalibrationResult:
    homography: np.ndarray   # 3x3, normalized h33 = 1
    temporal_offset_us: int
    score: float


def _normalize_points(pts: np.ndarray):
    centroid = pts.mean(axis=0)
    scale = np.sqrt(2) / (np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean() + 1e-12)
    T = np.array([[scale, 0, -scale * centroid[0]],
                  [0, scale, -scale * centroid[1]],
                  [0, 0, 1.0]])
    ph = np.column_stack([pts, np.ones(len(pts))])
    return (T @ ph.T).T[:, :2], T


def _dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Normalized direct linear transform from >= 4 correspondences."""
    src_n, T_src = _normalize_points(src)
    dst_n, T_dst = _normalize_points(dst)
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    zero = np.zeros(len(src))
    one = np.ones(len(src))
    rows_u = np.column_stack([x, y, one, zero, zero, zero, -u * x, -u * y, -u])
    rows_v = np.column_stack([zero, zero, zero, x, y, one, -v * x, -v * y, -v])
    A = np.concatenate([rows_u, rows_v])
    if np.linalg.matrix_rank(A) < 8:
        return None
    _, _, vt = np.linalg.svd(A)
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(T_dst) @ Hn @ T_src
    if abs(H[2, 2]) < 1e-12:
        return None
    return H / H[2, 2]


def project(H: np.ndarray, pts: np.ndarray) -> np.ndarray:
    ph = np.column_stack([pts, np.ones(len(pts))])
    q = (H @ ph.T).T
    return q[:, :2] / q[:, 2:3]


def estimate_homography(src: np.ndarray, dst: np.ndarray, *,
                        iterations: int = 2000,
                        inlier_threshold_px: float = 2.0,
                        seed: int = 0) -> CalibrationResult:
    """RANSAC over 4-point DLT hypotheses, refit on the best inlier set."""
    src = np.asarray(src, np.float64)
    dst = np.asarray(dst, np.float64)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise DegenerateGeometryError(f"need >= 4 matched point pairs, got {n}")
    rng = np.random.default_rng(seed)
    best_inliers = None
    for _ in range(iterations):
        idx = rng.choice(n, 4, replace=False)
        H = _dlt(src[idx], dst[idx])
        if H is None:
            continue
        err = np.linalg.norm(project(H, src) - dst, axis=1)
        inliers = err < inlier_threshold_px
        if best_inliers is None or inliers.sum() > best_inliers.sum():
            best_inliers = inliers
    if best_inliers is None or best_inliers.sum() < 4 or \
            best_inliers.sum() < 0.25 * n:
        ratio = 0.0 if best_inliers is None else best_inliers.sum() / n
        raise DegenerateGeometryError(
            f"inlier ratio {ratio:.2f} below 25% or too few inliers")
    H = _dlt(src[best_inliers], dst[best_inliers])
    if H is None:
        raise DegenerateGeometryError("degenerate inlier configuration")
    return CalibrationResult(H, 0, float(best_inliers.sum() / n))


def stack_event_frame(stream: EventStream, window: tuple[int, int]) -> np.ndarray:
    """Per-pixel absolute event count in [t0, t1], normalized by the maximum."""
    t0, t1 = window
    keep = (stream.t >= t0) & (stream.t <= t1)
    img = np.zeros((stream.height, stream.width), np.float64)
    np.add.at(img, (stream.y[keep], stream.x[keep]), 1.0)
    peak = img.max()
    return img / peak if peak > 0 else img


def gradient_map(image: np.ndarray) -> np.ndarray:
    """Central-difference gradient magnitude, normalized to [0, 1]."""
    gy, gx = np.gradient(image.astype(np.float64))
    mag = np.hypot(gx, gy)
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def estimate_temporal_offset(stream: EventStream, frames: FrameSequence,
                             search_range_us: int, step_us: int) -> CalibrationResult:
    """Grid search over offsets maximizing mean SSIM between stacked event
    frames and frame gradient maps. Frames must already share the event
    geometry. Ties break toward the smallest |offset|."""
    if len(stream) == 0:
        raise ValidationError("temporal calibration needs a non-empty event stream")
    if (frames.height, frames.width) != (stream.height, stream.width):
        raise ValidationError("frames must be downsampled to the event geometry")
    if step_us < 1:
        raise ValidationError("step_us must be >= 1")
    if len(frames) < 2:
        raise ValidationError("temporal calibration needs >= 2 frames")

    interval = int(np.median(np.diff(frames.timestamps)))
    half = interval // 2
    grads = [gradient_map(f) for f in frames.frames]

    offsets = np.arange(-search_range_us, search_range_us + 1, step_us, np.int64)
    # evaluate candidates nearest zero first so ties keep the smallest |offset|
    offsets = offsets[np.lexsort((offsets < 0, np.abs(offsets)))]
    best_offset, best_score = None, -np.inf
    for off in offsets:
        scores = []
        for ft, grad in zip(frames.timestamps, grads):
            center = int(ft) + int(off)
            stack = stack_event_frame(stream, (center - half, center + half))
            scores.append(ssim(stack, grad))
        score = float(np.mean(scores))
        if score > best_score:
            best_offset, best_score = int(off), score
    return CalibrationResult(np.eye(3), best_offset, best_score)
