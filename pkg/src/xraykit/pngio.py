"""PNG encoding helpers for images, heatmaps, and explanation overlays."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage

from .preprocess import Image


def encode_gray_png(img: Image) -> bytes:
    arr = (np.clip(img.pixels[:, :, 0], 0.0, 1.0) * 255.0).round().astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def encode_heatmap_png(values: np.ndarray, scale: float | None = None) -> bytes:
    """Nonnegative per-pixel values as a red-on-black 8-bit heatmap."""
    v = np.asarray(values, dtype=np.float64)
    top = scale if scale is not None else max(float(v.max()), 1e-12)
    red = (np.clip(v / top, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    rgb = np.zeros(red.shape + (3,), dtype=np.uint8)
    rgb[:, :, 0] = red
    buf = io.BytesIO()
    PILImage.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def encode_rgba_png(rgba: np.ndarray) -> bytes:
    """(H, W, 4) floats in [0,1] to RGBA PNG bytes."""
    arr = (np.clip(rgba, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()
