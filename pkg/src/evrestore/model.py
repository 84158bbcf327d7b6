"""Multi-scale blur-event fusion network.

The forward map takes an HR blurry image plus dense encodings of the LR
event stream and produces a sharp latent frame (as a residual on the blurry
input), an HR event tensor and per-scale attention maps. Scales are fixed
to reduction factors {1, 2, 4}.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import GeometryError, IntegrityError, TimeRangeError
from .events import (EventStream, build_representation, encode_voxel_grid,
                     event_mask, rescale_tensor, slice_window)
from .simulator import FrameSequence

SCALES = (1, 2, 4)
CHECKPOINT_MAGIC = b"CZN1"


@dataclass(frozen=True)
class NetworkConfig:
    base_channels: int = 16
    voxel_bins: int = 8
    dilation_rates: tuple = (1, 2)
    n_latent_frames: int = 7
    rho: int = 4
    delta_t_fraction: float = 0.2

    @property
    def event_channels_in(self) -> int:
        return 2 * self.voxel_bins

    def validate_geometry(self, height: int, width: int) -> None:
        if height % 4 or width % 4:
            raise GeometryError(f"input geometry {height}x{width} must be divisible by 4")
        if height % self.rho or width % self.rho:
            raise GeometryError(
                f"input geometry {height}x{width} must be divisible by rho={self.rho}")


@dataclass(frozen=True)
class ModelOutput:
    sharp: np.ndarray             # (H, W)
    hr_event_tensor: np.ndarray   # (2 * bins, H, W)
    attention_maps: dict          # scale -> (H/s, W/s)


class DoubleDilatedConv(nn.Module):
    """Two 3x3 convolutions with increasing dilation, each followed by ReLU."""

    def __init__(self, in_ch, out_ch, dilations=(1, 2)):
        super().__init__()
        d1, d2 = dilations
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=d1, dilation=d1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=d2, dilation=d2)

    def forward(self, x):
        return F.relu(self.conv2(F.relu(self.conv1(x))))


class Encoder(nn.Module):
    """Two plain conv blocks mapping raw inputs to feature space."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)

    def forward(self, x):
        return F.relu(self.conv2(F.relu(self.conv1(x))))


class UpscaleConv(nn.Module):
    """Learned x2 upscaling (transposed conv) followed by a single conv."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.up = nn.ConvTranspose2d(in_ch, in_ch, 4, stride=2, padding=1)
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)

    def forward(self, x):
        return self.conv(self.up(x))


class BlurAttention(nn.Module):
    """Per-scale blur-aware attention head; sigmoid output in (0, 1).

    The preactivation is squashed through a scaled tanh so the sigmoid can
    never saturate to exact 0/1: zero-valued attention targets otherwise
    drive the preactivation to -inf under an L1 loss, after which the dead
    gradient freezes the whole gated decoder.
    """

    PREACT_BOUND = 8.0

    def __init__(self, in_ch, dilations=(1, 2)):
        super().__init__()
        d1, d2 = dilations
        self.conv1 = nn.Conv2d(in_ch, in_ch, 3, padding=d1, dilation=d1)
        self.conv2 = nn.Conv2d(in_ch, 1, 3, padding=d2, dilation=d2)

    def forward(self, x):
        y = self.conv2(F.relu(self.conv1(x)))
        b = self.PREACT_BOUND
        return torch.sigmoid(b * torch.tanh(y / b))


def adaptive_enhance(m_fu, m_b, attention, mask):
    """Reweight fusion/blur features by event occurrence and blur attention.

    W1 = A * EM gates the fused (event-derived) channels; W2 = A * (1 - EM)
    gates the blur channels. Returns concat(blur part, fused part).
    """
    w1 = attention * mask
    w2 = attention * (1.0 - mask)
    return torch.cat([w2 * m_b, w1 * m_fu], dim=1)


class FusionNet(nn.Module):
    """Blur pyramid + dual encoders + coarse-to-fine fusion + dual heads."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        c = config.base_channels
        dil = tuple(config.dilation_rates)
        ev_in = config.event_channels_in

        self.blur_enc = nn.ModuleDict(
            {str(s): Encoder(1, c) for s in SCALES})
        self.event_enc = nn.ModuleDict(
            {str(s): Encoder(ev_in, c) for s in SCALES})

        self.fuse4 = DoubleDilatedConv(2 * c, c, dil)
        self.up4to2 = UpscaleConv(c, c)
        self.fuse2 = DoubleDilatedConv(3 * c, c, dil)
        self.up2to1 = UpscaleConv(c, c)
        self.fuse1 = DoubleDilatedConv(3 * c, c, dil)

        self.attention = nn.ModuleDict(
            {str(s): BlurAttention(c, dil) for s in SCALES})

        # multi-scale decoder: enhanced features are 2c channels per scale
        self.dec_up2 = UpscaleConv(2 * c, 2 * c)
        self.dec_up4a = UpscaleConv(2 * c, 2 * c)
        self.dec_up4b = UpscaleConv(2 * c, 2 * c)
        self.dec_trunk = DoubleDilatedConv(6 * c, 2 * c, dil)

        # cross-interaction heads
        self.cip_md_img = DoubleDilatedConv(c, c, dil)
        self.cip_esr_img = DoubleDilatedConv(c, c, dil)
        self.img_out = nn.Conv2d(2 * c, 1, 3, padding=1)
        self.cip_esr_ev = DoubleDilatedConv(c, c, dil)
        self.cip_md_ev = DoubleDilatedConv(c, c, dil)
        self.event_out = nn.Conv2d(2 * c + config.voxel_bins, ev_in, 3, padding=1)

        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                nn.init.kaiming_uniform_(m.weight, a=np.sqrt(5))
                nn.init.zeros_(m.bias)
        # output heads start at zero so training begins from the residual identity
        nn.init.zeros_(self.img_out.weight)
        nn.init.zeros_(self.event_out.weight)

    def zero_image_head(self):
        with torch.no_grad():
            self.img_out.weight.zero_()
            self.img_out.bias.zero_()

    @staticmethod
    def blur_pyramid(blurry):
        """Area-downsampled copies at reduction factors 1, 2, 4."""
        if blurry.shape[-2] % 4 or blurry.shape[-1] % 4:
            raise GeometryError("blur pyramid needs H, W divisible by 4")
        b2 = F.avg_pool2d(blurry, 2)
        return {1: blurry, 2: b2, 4: F.avg_pool2d(b2, 2)}

    def fuse(self, m_b, m_e):
        """Coarse-to-fine blur-event fusion across the scale pyramid."""
        for s in SCALES:
            if m_b[s].shape[-2:] != m_e[s].shape[-2:]:
                raise GeometryError(f"feature geometry mismatch at scale {s}")
        m_fu = {}
        m_fu[4] = self.fuse4(torch.cat([m_b[4], m_e[4]], dim=1))
        u2 = self.up4to2(m_fu[4])
        m_fu[2] = self.fuse2(torch.cat([m_b[2], m_e[2], u2], dim=1))
        u1 = self.up2to1(m_fu[2])
        m_fu[1] = self.fuse1(torch.cat([m_b[1], m_e[1], u1], dim=1))
        return m_fu

    def decode(self, m_att):
        """Merge enhanced multi-scale features into the two task features."""
        up2 = self.dec_up2(m_att[2])
        up4 = self.dec_up4b(self.dec_up4a(m_att[4]))
        trunk = self.dec_trunk(torch.cat([m_att[1], up2, up4], dim=1))
        c = self.config.base_channels
        return trunk[:, :c], trunk[:, c:]

    def predict_heads(self, m_md, m_esr, blurry, e_dt_hr):
        """Cross-interaction heads: residual sharp image and HR event tensor."""
        img = self.img_out(torch.cat(
            [self.cip_md_img(m_md), self.cip_esr_img(m_esr)], dim=1)) + blurry
        ev = self.event_out(torch.cat(
            [self.cip_esr_ev(m_esr), self.cip_md_ev(m_md), e_dt_hr], dim=1))
        return img, ev

    def forward(self, blurry, event_rep, masks, e_dt_hr):
        """Full graph on batched tensors.

        blurry: (N, 1, H, W); event_rep[s]: (N, 2*bins, H/s, W/s);
        masks[s]: (N, 1, H/s, W/s) with values in {0.1, 1.0};
        e_dt_hr: (N, bins, H, W).
        """
        pyramid = self.blur_pyramid(blurry)
        m_b = {s: self.blur_enc[str(s)](pyramid[s]) for s in SCALES}
        m_e = {s: self.event_enc[str(s)](event_rep[s]) for s in SCALES}
        m_fu = self.fuse(m_b, m_e)
        attention = {s: self.attention[str(s)](m_fu[s]) for s in SCALES}
        m_att = {s: adaptive_enhance(m_fu[s], m_b[s], attention[s], masks[s])
                 for s in SCALES}
        m_md, m_esr = self.decode(m_att)
        sharp, ev = self.predict_heads(m_md, m_esr, blurry, e_dt_hr)
        return sharp, ev, attention


def _mask_pyramid(lr_mask: np.ndarray, rho: int) -> dict:
    """Scale-1 mask by nearest-neighbor replication of the LR mask, coarser
    scales by 2x2 max pooling so any event in a cell marks the cell."""
    m1 = np.kron(lr_mask, np.ones((rho, rho)))
    masks = {1: m1}
    for s in (2, 4):
        prev = masks[s // 2]
        h, w = prev.shape
        masks[s] = prev.reshape(h // 2, 2, w // 2, 2).max(axis=(1, 3))
    return masks


def prepare_inputs(config: NetworkConfig, blurry: np.ndarray,
                   lr_events: EventStream, t: int):
    """Build the dense network inputs for one sample at one timestamp."""
    h, w = blurry.shape
    config.validate_geometry(h, w)
    if (lr_events.height * config.rho, lr_events.width * config.rho) != (h, w):
        raise GeometryError("LR event geometry inconsistent with rho and image size")
    rep_lr = build_representation(lr_events, t, config.delta_t_fraction,
                                  config.voxel_bins)
    rep1 = rescale_tensor(rep_lr, config.rho)
    event_rep = {1: rep1, 2: rescale_tensor(rep1, 0.5),
                 4: rescale_tensor(rep1, 0.25)}
    masks = _mask_pyramid(event_mask(lr_events), config.rho)
    e_dt_hr = rep1[:config.voxel_bins]
    return event_rep, masks, e_dt_hr


def _to_batched(arr, dtype):
    t = torch.from_numpy(np.ascontiguousarray(arr)).to(dtype)
    if t.ndim == 2:
        t = t[None]
    return t[None]


def forward(model: FusionNet, blurry: np.ndarray, lr_events: EventStream,
            t: int) -> ModelOutput:
    """Run the network on one sample; pure function of (inputs, parameters)."""
    dtype = next(model.parameters()).dtype
    event_rep, masks, e_dt_hr = prepare_inputs(model.config, blurry, lr_events, t)
    with torch.no_grad():
        sharp, ev, attention = model(
            _to_batched(blurry, dtype),
            {s: _to_batched(r, dtype) for s, r in event_rep.items()},
            {s: _to_batched(m, dtype) for s, m in masks.items()},
            _to_batched(e_dt_hr, dtype))
    return ModelOutput(
        sharp=sharp[0, 0].numpy(),
        hr_event_tensor=ev[0].numpy(),
        attention_maps={s: a[0, 0].numpy() for s, a in attention.items()})


def predict_sequence(model: FusionNet, blurry: np.ndarray,
                     lr_events: EventStream, timestamps) -> tuple:
    """One forward pass per timestamp, reusing the entire-exposure encoding."""
    config = model.config
    h, w = blurry.shape
    config.validate_geometry(h, w)
    dtype = next(model.parameters()).dtype
    entire = encode_voxel_grid(lr_events, config.voxel_bins)
    masks = _mask_pyramid(event_mask(lr_events), config.rho)
    masks_t = {s: _to_batched(m, dtype) for s, m in masks.items()}
    blurry_t = _to_batched(blurry, dtype)

    frames, tensors = [], []
    for t in timestamps:
        if t < lr_events.t_start or t > lr_events.t_end:
            raise TimeRangeError(f"timestamp {t} outside exposure interval")
        window = slice_window(lr_events, int(t),
                              int(round(config.delta_t_fraction * lr_events.duration)))
        local = encode_voxel_grid(window, config.voxel_bins)
        rep1 = rescale_tensor(np.concatenate([local, entire]), config.rho)
        event_rep = {1: rep1, 2: rescale_tensor(rep1, 0.5),
                     4: rescale_tensor(rep1, 0.25)}
        with torch.no_grad():
            sharp, ev, _ = model(
                blurry_t,
                {s: _to_batched(r, dtype) for s, r in event_rep.items()},
                masks_t,
                _to_batched(rep1[:config.voxel_bins], dtype))
        frames.append(sharp[0, 0].numpy())
        tensors.append(ev[0].numpy())
    seq = FrameSequence(np.clip(np.stack(frames), 0.0, 1.0),
                        np.asarray(timestamps, np.int64))
    return seq, tensors


def save_checkpoint(path, model: FusionNet) -> None:
    """Self-describing container: magic, JSON config block, named f32 blobs."""
    cfg = asdict(model.config)
    cfg["dilation_rates"] = list(cfg["dilation_rates"])
    cfg_bytes = json.dumps(cfg, sort_keys=True).encode()
    state = model.state_dict()
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", len(cfg_bytes)))
    buf.write(cfg_bytes)
    buf.write(struct.pack("<I", len(state)))
    for name, tensor in state.items():
        data = tensor.detach().cpu().to(torch.float32).numpy()
        name_b = name.encode()
        buf.write(struct.pack("<H", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<B", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
        buf.write(np.ascontiguousarray(data, "<f4").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> FusionNet:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise IntegrityError(f"{path}: bad checkpoint magic {data[:4]!r}")
    off = 4
    try:
        (cfg_len,) = struct.unpack_from("<I", data, off); off += 4
        cfg = json.loads(data[off:off + cfg_len]); off += cfg_len
        cfg["dilation_rates"] = tuple(cfg["dilation_rates"])
        model = FusionNet(NetworkConfig(**cfg))
        (n_params,) = struct.unpack_from("<I", data, off); off += 4
        state = {}
        for _ in range(n_params):
            (name_len,) = struct.unpack_from("<H", data, off); off += 2
            name = data[off:off + name_len].decode(); off += name_len
            (ndim,) = struct.unpack_from("<B", data, off); off += 1
            shape = struct.unpack_from(f"<{ndim}I", data, off); off += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data, "<f4", count, off).reshape(shape).copy()
            off += 4 * count
            state[name] = torch.from_numpy(arr)
    except (struct.error, json.JSONDecodeError, TypeError, ValueError,
            UnicodeDecodeError) as exc:
        raise IntegrityError(f"{path}: corrupt checkpoint ({exc})") from exc
    if off != len(data):
        raise IntegrityError(f"{path}: trailing bytes in checkpoint")
    model.load_state_dict(state)
    return model
