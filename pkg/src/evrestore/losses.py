"""Training losses: L1 deblurring, L1 event-tensor, multi-scale attention."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .errors import GeometryError, TrainingDivergedError


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def loss_md(pred, gt):
    """Mean absolute error between predicted and ground-truth sharp frames."""
    pred, gt = _as_tensor(pred), _as_tensor(gt)
    if pred.shape != gt.shape:
        raise GeometryError(f"geometry mismatch {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return (pred - gt).abs().mean()


def loss_esr(pred, gt):
    """Mean absolute error between predicted and ground-truth event tensors."""
    return loss_md(pred, gt)


def downscale_map(gt, scale: int):
    """Area-downsample an attention map to a coarser pyramid scale."""
    if scale == 1:
        return gt
    if gt.ndim == 2:
        gt = gt[None, None]
    elif gt.ndim == 3:
        gt = gt[:, None]
    return F.avg_pool2d(gt, scale).squeeze()


def loss_att(pred_maps: dict, gt):
    """Mean over scales of per-scale MAE against the area-downsampled target.

    pred_maps: scale -> attention map at geometry (H/s, W/s); gt at scale 1.
    """
    gt = _as_tensor(gt)
    terms = []
    for scale, pred in pred_maps.items():
        pred = _as_tensor(pred)
        target = downscale_map(gt.to(pred.dtype), scale)
        if pred.squeeze().shape != target.squeeze().shape:
            raise GeometryError(
                f"attention geometry mismatch at scale {scale}")
        terms.append((pred.squeeze() - target.squeeze()).abs().mean())
    return torch.stack(terms).mean()


def loss_total(l_md, l_esr, l_att, alpha: float = 1.0, beta: float = 1.0):
    """Weighted sum L_md + alpha * L_esr + beta * L_att."""
    total = _as_tensor(l_md) + alpha * _as_tensor(l_esr) + beta * _as_tensor(l_att)
    if not torch.isfinite(total):
        raise TrainingDivergedError(
            f"non-finite loss: md={float(l_md)} esr={float(l_esr)} att={float(l_att)}")
    return total
