"""PNG grid rendering for predicted frames and event tensors."""

from __future__ import annotations

import numpy as np
from PIL import Image


def frame_grid(frames: np.ndarray, cols: int | None = None, pad: int = 2) -> Image.Image:
    """Tile grayscale frames (n, H, W) in [0, 1] into one 8-bit image."""
    n, h, w = frames.shape
    cols = cols or n
    rows = (n + cols - 1) // cols
    canvas = np.zeros((rows * (h + pad) - pad, cols * (w + pad) - pad), np.uint8)
    for i, frame in enumerate(frames):
        r, c = divmod(i, cols)
        y0, x0 = r * (h + pad), c * (w + pad)
        canvas[y0:y0 + h, x0:x0 + w] = np.round(np.clip(frame, 0, 1) * 255)
    return Image.fromarray(canvas, mode="L")


def event_grid(tensor: np.ndarray, cols: int = 4, pad: int = 2) -> Image.Image:
    """Tile event-tensor channels with a diverging colormap.

    Positive mass renders red, negative blue, normalized per tensor.
    """
    c, h, w = tensor.shape
    peak = max(np.abs(tensor).max(), 1e-12)
    rows = (c + cols - 1) // cols
    canvas = np.zeros((rows * (h + pad) - pad, cols * (w + pad) - pad, 3), np.uint8)
    for i in range(c):
        r, col = divmod(i, cols)
        chan = tensor[i] / peak
        rgb = np.zeros((h, w, 3))
        rgb[..., 0] = np.clip(chan, 0, 1)
        rgb[..., 2] = np.clip(-chan, 0, 1)
        y0, x0 = r * (h + pad), col * (w + pad)
        canvas[y0:y0 + h, x0:x0 + w] = np.round(rgb * 255)
    return Image.fromarray(canvas, mode="RGB")
