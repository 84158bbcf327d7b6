"""Training loop: Adam on the combined loss with stepped lr decay."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augment import augment
from .dataset import DatasetSample
from .errors import TrainingDivergedError, ValidationError
from .events import build_representation
from .losses import loss_att, loss_esr, loss_md, loss_total
from .metrics import psnr
from .model import FusionNet, NetworkConfig, prepare_inputs, save_checkpoint, SCALES

REPORT_HEADER = ["epoch", "l_md", "l_esr", "l_att", "l_total", "lr", "psnr_train"]


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1.0
    beta: float = 1.0
    lr: float = 1e-4
    lr_decay: float = 0.98
    decay_every: int = 5
    epochs: int = 10
    batch_size: int = 2
    rotation_range: float = 10.0
    use_flips: bool = True
    use_rotation: bool = True
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be >= 0")
        if self.lr <= 0:
            raise ValidationError("lr must be > 0")


@dataclass
class TrainReport:
    rows: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(",".join(REPORT_HEADER) + "\n")
            for row in self.rows:
                f.write(",".join(f"{row[k]:.8g}" if isinstance(row[k], float)
                                 else str(row[k]) for k in REPORT_HEADER) + "\n")


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate for a 0-based epoch index (stepped exponential decay)."""
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.decay_every)


def _augment_seed(base_seed: int, epoch: int, index: int) -> int:
    ss = np.random.SeedSequence([base_seed, epoch, index])
    return int(ss.generate_state(1)[0])


def _prepare_batch(samples: list[DatasetSample], net_cfg: NetworkConfig,
                   frame_choices: list[int], dtype):
    """Stack per-sample inputs and supervision targets into batched tensors."""
    blurry, reps, masks, e_dts = [], {s: [] for s in SCALES}, {s: [] for s in SCALES}, []
    gt_sharp, gt_event, gt_attn = [], [], []
    for sample, fi in zip(samples, frame_choices):
        t = int(sample.hr_sharp.timestamps[fi])
        rep, mask, e_dt = prepare_inputs(net_cfg, sample.hr_blurry,
                                         sample.lr_events, t)
        blurry.append(sample.hr_blurry)
        for s in SCALES:
            reps[s].append(rep[s])
            masks[s].append(mask[s][None])
        e_dts.append(e_dt)
        gt_sharp.append(sample.hr_sharp.frames[fi])
        gt_event.append(build_representation(sample.hr_events, t,
                                             net_cfg.delta_t_fraction,
                                             net_cfg.voxel_bins))
        gt_attn.append(sample.gt_attention[fi])

    def stack(arrs, add_channel=False):
        a = np.stack(arrs)
        if add_channel:
            a = a[:, None]
        return torch.as_tensor(a, dtype=dtype)

    return (stack(blurry, True),
            {s: stack(reps[s]) for s in SCALES},
            {s: stack(masks[s]) for s in SCALES},
            stack(e_dts),
            stack(gt_sharp, True), stack(gt_event), stack(gt_attn))


def train_step(model: FusionNet, optimizer, batch, cfg: TrainConfig):
    blurry, reps, masks, e_dt, gt_sharp, gt_event, gt_attn = batch
    optimizer.zero_grad()
    sharp, ev, attention = model(blurry, reps, masks, e_dt)
    l_md = loss_md(sharp, gt_sharp)
    l_esr = loss_esr(ev, gt_event)
    l_att = loss_att({s: attention[s] for s in SCALES}, gt_attn)
    total = loss_total(l_md, l_esr, l_att, cfg.alpha, cfg.beta)
    total.backward()
    optimizer.step()
    losses = [x.detach().item() for x in (l_md, l_esr, l_att, total)]
    return (*losses, sharp.detach(), gt_sharp)


def train(samples: list[DatasetSample], net_cfg: NetworkConfig,
          cfg: TrainConfig, out_dir=None) -> tuple[FusionNet, TrainReport]:
    """Seed-deterministic Adam training over a list of dataset samples."""
    if not samples:
        raise ValidationError("training needs a non-empty dataset")
    t0 = time.perf_counter()
    torch.manual_seed(cfg.seed)
    model = FusionNet(net_cfg)
    dtype = next(model.parameters()).dtype
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr,
                                 betas=(0.9, 0.999), eps=1e-8)
    rng = np.random.default_rng(cfg.seed)
    report = TrainReport()

    ckpt_dir = None
    if out_dir is not None:
        ckpt_dir = Path(out_dir)
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    steps = 0
    n_frames = net_cfg.n_latent_frames
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = rng.permutation(len(samples))
        epoch_losses = []
        last = None
        for start in range(0, len(order), cfg.batch_size):
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                break
            idxs = order[start:start + cfg.batch_size]
            batch_samples = []
            for i in idxs:
                s = samples[int(i)]
                if cfg.use_flips or cfg.use_rotation:
                    s = augment(s, _augment_seed(cfg.seed, epoch, int(i)),
                                cfg.rotation_range, cfg.use_flips, cfg.use_rotation)
                batch_samples.append(s)
            frame_choices = [int(rng.integers(min(n_frames, len(s.hr_sharp))))
                             for s in batch_samples]
            batch = _prepare_batch(batch_samples, net_cfg, frame_choices, dtype)
            last = train_step(model, optimizer, batch, cfg)
            epoch_losses.append(last[:4])
            steps += 1
        if not epoch_losses:
            break
        mean = np.mean(epoch_losses, axis=0)
        pred, gt = last[4], last[5]
        psnr_train = psnr(pred.clamp(0, 1).numpy(), gt.numpy())
        report.rows.append({"epoch": epoch, "l_md": float(mean[0]),
                            "l_esr": float(mean[1]), "l_att": float(mean[2]),
                            "l_total": float(mean[3]), "lr": lr,
                            "psnr_train": psnr_train})
        if ckpt_dir is not None:
            save_checkpoint(ckpt_dir / f"epoch_{epoch:03d}.czn", model)
        if cfg.max_steps is not None and steps >= cfg.max_steps:
            break

    if ckpt_dir is not None:
        save_checkpoint(ckpt_dir / "final.czn", model)
    report.wall_clock_s = time.perf_counter() - t0
    return model, report
