"""Geometric training augmentation applied consistently to frames and events."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .dataset import DatasetSample
from .events import EventStream
from .simulator import FrameSequence


def _flip_images(imgs: np.ndarray, flip_h: bool, flip_v: bool) -> np.ndarray:
    if flip_h:
        imgs = imgs[..., ::-1]
    if flip_v:
        imgs = imgs[..., ::-1, :]
    return np.ascontiguousarray(imgs)


def _rotate_images(imgs: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate about the image center, bilinear resampling, zero padding.

    Convention: a pixel at (x, y) moves to R(angle) @ (x - c) + c, matching
    the event coordinate transform.
    """
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    h, w = imgs.shape[-2:]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    # inverse map in (row, col) = (y, x) order: rotation by -theta
    mat = np.array([[cos, -sin], [sin, cos]])
    offset = np.array([cy, cx]) - mat @ np.array([cy, cx])

    def rot(img):
        return ndimage.affine_transform(img, mat, offset=offset, order=1,
                                        mode="constant", cval=0.0)

    if imgs.ndim == 2:
        return rot(imgs)
    return np.stack([rot(f) for f in imgs])


def _transform_events(stream: EventStream, flip_h: bool, flip_v: bool,
                      angle_deg: float) -> EventStream:
    x = stream.x.astype(np.float64)
    y = stream.y.astype(np.float64)
    if flip_h:
        x = stream.width - 1 - x
    if flip_v:
        y = stream.height - 1 - y
    if angle_deg != 0.0:
        theta = np.deg2rad(angle_deg)
        cos, sin = np.cos(theta), np.sin(theta)
        cx, cy = (stream.width - 1) / 2.0, (stream.height - 1) / 2.0
        xr = cx + cos * (x - cx) - sin * (y - cy)
        yr = cy + sin * (x - cx) + cos * (y - cy)
        x, y = xr, yr
    xi = np.rint(x).astype(np.int32)
    yi = np.rint(y).astype(np.int32)
    keep = (xi >= 0) & (xi < stream.width) & (yi >= 0) & (yi < stream.height)
    return EventStream(stream.width, stream.height, stream.t_start, stream.t_end,
                       stream.t[keep], xi[keep], yi[keep], stream.p[keep])


def transform_sample(sample: DatasetSample, flip_h: bool = False,
                     flip_v: bool = False, angle_deg: float = 0.0) -> DatasetSample:
    """Apply one geometric transform to images, attention maps and events."""
    def imgs(a):
        a = _flip_images(a, flip_h, flip_v)
        if angle_deg != 0.0:
            a = _rotate_images(a, angle_deg)
        return a

    return DatasetSample(
        hr_sharp=FrameSequence(imgs(sample.hr_sharp.frames),
                               sample.hr_sharp.timestamps),
        hr_blurry=imgs(sample.hr_blurry),
        lr_events=_transform_events(sample.lr_events, flip_h, flip_v, angle_deg),
        hr_events=_transform_events(sample.hr_events, flip_h, flip_v, angle_deg),
        gt_attention=imgs(sample.gt_attention),
        rho=sample.rho)


def augment(sample: DatasetSample, seed: int,
            rotation_range: float = 10.0, use_flips: bool = True,
            use_rotation: bool = True) -> DatasetSample:
    """Draw a random flip (none/h/v/hv) and rotation angle; deterministic per seed."""
    rng = np.random.default_rng(seed)
    flip_h = flip_v = False
    if use_flips:
        choice = int(rng.integers(4))
        flip_h = choice in (1, 3)
        flip_v = choice in (2, 3)
    angle = float(rng.uniform(-rotation_range, rotation_range)) if use_rotation else 0.0
    return transform_sample(sample, flip_h, flip_v, angle)
