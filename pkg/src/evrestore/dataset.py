"""Synthetic paired-sample generation and on-disk dataset layout.

A sample directory holds blurry.png, sharp_000..N.png, attn_000..N.png
(16-bit grayscale PNGs), events_lr.evs, events_hr.evs and a key = value
manifest. All images are quantized to the 16-bit grid at generation time so
the round-trip through PNG is lossless.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import GeometryError, IntegrityError, ValidationError
from .events import EventStream
from .evs_io import read_evs, write_evs
from .simulator import (FrameSequence, SimulatorConfig, area_downsample,
                        make_blur_mask, simulate_events, synthesize_blur)

MANIFEST_NAME = "manifest.txt"
_QUANT = 65535


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a rendered random-texture scene under affine motion."""

    height: int = 64
    width: int = 64
    rho: int = 4
    n_key_frames: int = 7
    subframe_factor: int = 6          # rendered subframes per key-frame interval
    exposure_us: int = 100_000
    duty_cycle: float = 1.0           # exposure fraction of the rendered span
    n_waves: int = 6                  # random sinusoid components in the texture
    max_speed_px: float = 8.0         # translation magnitude over the exposure
    max_rotation_deg: float = 2.0     # rotation magnitude over the exposure
    blur_threshold: float = 0.05      # attention-map threshold

    def __post_init__(self):
        if self.height % self.rho or self.width % self.rho:
            raise GeometryError("scene geometry must be divisible by rho")
        if self.height % 4 or self.width % 4:
            raise GeometryError("scene geometry must be divisible by 4")
        if self.subframe_factor < 4:
            raise ValidationError("subframe_factor must be >= 4")
        if not 0 < self.duty_cycle <= 1:
            raise ValidationError("duty_cycle must be in (0, 1]")


@dataclass(frozen=True)
class DatasetSample:
    hr_sharp: FrameSequence      # the N key frames
    hr_blurry: np.ndarray        # (H, W)
    lr_events: EventStream       # geometry H/rho x W/rho
    hr_events: EventStream       # geometry H x W
    gt_attention: np.ndarray     # (N, H, W) in [0, 1]
    rho: int

    def __post_init__(self):
        h, w = self.hr_blurry.shape
        if (self.hr_sharp.height, self.hr_sharp.width) != (h, w):
            raise GeometryError("sharp sequence / blurry geometry mismatch")
        if (self.lr_events.height, self.lr_events.width) != (h // self.rho, w // self.rho):
            raise GeometryError("LR event geometry must be HR geometry / rho")
        if (self.hr_events.height, self.hr_events.width) != (h, w):
            raise GeometryError("HR event geometry must match the blurry image")
        if self.gt_attention.shape != (len(self.hr_sharp), h, w):
            raise GeometryError("one attention map per sharp frame required")


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * _QUANT) / _QUANT


def _render_texture(spec: SceneSpec, rng: np.random.Generator):
    """Random sum-of-sinusoids texture evaluated analytically at any coords."""
    amps = rng.uniform(0.5, 1.0, spec.n_waves)
    # wavelengths of roughly 8..50 px so structure survives area downsampling
    freqs = rng.uniform(0.02, 0.12, (spec.n_waves, 2)) * rng.choice([-1, 1], (spec.n_waves, 2))
    phases = rng.uniform(0, 2 * np.pi, spec.n_waves)
    norm = amps.sum()

    def tex(xc, yc):
        acc = np.zeros_like(xc, np.float64)
        for a, (fx, fy), ph in zip(amps, freqs, phases):
            acc += a * np.sin(2 * np.pi * (fx * xc + fy * yc) + ph)
        # soft-clip for strong edges so motion produces pronounced blur bands
        return 0.5 + 0.45 * np.tanh(3.0 * acc / norm) / np.tanh(3.0)

    return tex


def generate_scene(spec: SceneSpec, cfg: SimulatorConfig) -> DatasetSample:
    """Render an HR sharp sequence under seeded affine motion and derive
    blurry image, LR/HR event streams and ground-truth attention maps."""
    rng = np.random.default_rng(cfg.seed)
    tex = _render_texture(spec, rng)
    speed = rng.uniform(-1.0, 1.0, 2) * spec.max_speed_px
    omega = np.deg2rad(rng.uniform(-1.0, 1.0) * spec.max_rotation_deg)

    n_key = spec.n_key_frames
    k = spec.subframe_factor
    total_us = int(round(spec.exposure_us / spec.duty_cycle))
    n_key_intervals = n_key - 1
    n_sub_intervals = int(round(n_key_intervals * k / spec.duty_cycle))
    sub_ts = np.rint(np.linspace(0, total_us, n_sub_intervals + 1)).astype(np.int64)
    key_idx = np.arange(n_key) * k  # key frames are a subset of the subframes

    h, w = spec.height, spec.width
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    frames = np.empty((len(sub_ts), h, w))
    for i, ts in enumerate(sub_ts):
        s = ts / spec.exposure_us  # motion parameterized by exposure time
        ang = omega * s
        dx, dy = speed * s
        xs = cx + np.cos(ang) * (xx - cx) - np.sin(ang) * (yy - cy) + dx
        ys = cy + np.sin(ang) * (xx - cx) + np.cos(ang) * (yy - cy) + dy
        frames[i] = tex(xs, ys)
    frames = _quantize(frames)

    hr_seq_full = FrameSequence(frames, sub_ts)
    hr_events = simulate_events(hr_seq_full, cfg)
    lr_seq_full = FrameSequence(_quantize(area_downsample(frames, spec.rho)), sub_ts)
    lr_events = simulate_events(lr_seq_full, cfg)

    key_frames = frames[key_idx]
    key_ts = sub_ts[key_idx]
    hr_sharp = FrameSequence(key_frames, key_ts)
    hr_blurry = _quantize(synthesize_blur(hr_sharp))
    gt_attention = _quantize(np.stack([
        make_blur_mask(hr_blurry, f, spec.blur_threshold) for f in key_frames]))

    return DatasetSample(hr_sharp, hr_blurry, lr_events, hr_events,
                         gt_attention, spec.rho)


def _write_png16(path, img: np.ndarray) -> None:
    data = np.round(np.clip(img, 0.0, 1.0) * _QUANT).astype(np.uint16)
    Image.fromarray(data).save(path)


def _read_png16(path) -> np.ndarray:
    img = np.asarray(Image.open(path), np.float64)
    return img / _QUANT


def write_manifest(path, fields: dict) -> None:
    with open(path, "w") as f:
        for key, value in fields.items():
            f.write(f"{key} = {value}\n")


def read_manifest(path) -> dict:
    fields = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise IntegrityError(f"{path}: malformed manifest line {line!r}")
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    return fields


def write_sample(path, sample: DatasetSample, *,
                 seed: int | None = None, cfg: SimulatorConfig | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    _write_png16(path / "blurry.png", sample.hr_blurry)
    for i, frame in enumerate(sample.hr_sharp.frames):
        _write_png16(path / f"sharp_{i:03d}.png", frame)
    for i, attn in enumerate(sample.gt_attention):
        _write_png16(path / f"attn_{i:03d}.png", attn)
    write_evs(path / "events_lr.evs", sample.lr_events)
    write_evs(path / "events_hr.evs", sample.hr_events)
    fields = {
        "rho": sample.rho,
        "height": sample.hr_blurry.shape[0],
        "width": sample.hr_blurry.shape[1],
        "n_frames": len(sample.hr_sharp),
        "timestamps_us": ",".join(str(int(t)) for t in sample.hr_sharp.timestamps),
        "exposure_us": int(sample.hr_sharp.timestamps[-1] - sample.hr_sharp.timestamps[0]),
    }
    if seed is not None:
        fields["seed"] = seed
    if cfg is not None:
        fields.update({f"sim_{k}": v for k, v in asdict(cfg).items()})
    write_manifest(path / MANIFEST_NAME, fields)


def read_sample(path) -> DatasetSample:
    path = Path(path)
    manifest = path / MANIFEST_NAME
    if not manifest.exists():
        raise IntegrityError(f"missing manifest {manifest}")
    fields = read_manifest(manifest)
    try:
        rho = int(fields["rho"])
        n_frames = int(fields["n_frames"])
        height, width = int(fields["height"]), int(fields["width"])
        timestamps = np.array([int(t) for t in fields["timestamps_us"].split(",")], np.int64)
    except (KeyError, ValueError) as exc:
        raise IntegrityError(f"{manifest}: invalid manifest ({exc})") from exc
    if len(timestamps) != n_frames:
        raise ValidationError(f"{manifest}: n_frames does not match timestamps_us")

    blurry = _read_png16(path / "blurry.png")
    if blurry.shape != (height, width):
        raise ValidationError(f"{path}: blurry.png geometry does not match manifest")
    frames = np.stack([_read_png16(path / f"sharp_{i:03d}.png") for i in range(n_frames)])
    attn = np.stack([_read_png16(path / f"attn_{i:03d}.png") for i in range(n_frames)])
    lr_events = read_evs(path / "events_lr.evs")
    hr_events = read_evs(path / "events_hr.evs")
    if (lr_events.height, lr_events.width) != (height // rho, width // rho):
        raise ValidationError(f"{path}: LR event geometry inconsistent with rho={rho}")
    return DatasetSample(FrameSequence(frames, timestamps), blurry,
                         lr_events, hr_events, attn, rho)


def write_frame_dir(path, seq: FrameSequence) -> None:
    """Store a bare frame sequence (frame_###.png + manifest) for calibration."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        _write_png16(path / f"frame_{i:03d}.png", frame)
    write_manifest(path / MANIFEST_NAME, {
        "n_frames": len(seq),
        "timestamps_us": ",".join(str(int(t)) for t in seq.timestamps),
    })


def read_frame_dir(path) -> FrameSequence:
    path = Path(path)
    fields = read_manifest(path / MANIFEST_NAME)
    try:
        n = int(fields["n_frames"])
        timestamps = np.array([int(t) for t in fields["timestamps_us"].split(",")], np.int64)
    except (KeyError, ValueError) as exc:
        raise IntegrityError(f"{path}: invalid frame manifest ({exc})") from exc
    frames = np.stack([_read_png16(path / f"frame_{i:03d}.png") for i in range(n)])
    return FrameSequence(frames, timestamps)


def list_samples(split_dir) -> list[Path]:
    split_dir = Path(split_dir)
    if not split_dir.is_dir():
        return []
    return sorted(p for p in split_dir.iterdir() if (p / MANIFEST_NAME).exists())
