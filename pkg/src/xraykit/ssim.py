"""Structural similarity with a Gaussian window.

Mean local SSIM over all fully-inside (valid) windows: 11x11 Gaussian taps,
sigma 1.5, K1=0.01, K2=0.03, dynamic range 1. The map is built from
symmetric expressions, so ssim(x, x) is exactly 1.0 in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatch


@dataclass
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0


def gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    half = (window - 1) / 2.0
    coords = np.arange(window) - half
    g = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _windowed_mean(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    w = kernel.shape[0]
    views = sliding_window_view(plane, (w, w))
    return np.einsum("ijkl,kl->ij", views, kernel)


def _as_plane(img) -> np.ndarray:
    arr = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ShapeMismatch("ssim expects single-channel images")
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ShapeMismatch(f"ssim expects a 2-d intensity grid, got shape {arr.shape}")
    return arr


def ssim_map(a, b, params: SsimParams | None = None) -> np.ndarray:
    """Local SSIM values at every valid window position."""
    p = params or SsimParams()
    x = _as_plane(a)
    y = _as_plane(b)
    if x.shape != y.shape:
        raise ShapeMismatch(f"ssim inputs differ in shape: {x.shape} vs {y.shape}")
    if min(x.shape) < p.window:
        raise ShapeMismatch(f"image {x.shape} smaller than ssim window {p.window}")
    kernel = gaussian_kernel(p.window, p.sigma)
    c1 = (p.k1 * p.data_range) ** 2
    c2 = (p.k2 * p.data_range) ** 2

    mu_x = _windowed_mean(x, kernel)
    mu_y = _windowed_mean(y, kernel)
    # identical second-moment expressions for both arguments keep x == y exact
    sigma_x = _windowed_mean(x * x, kernel) - mu_x * mu_x
    sigma_y = _windowed_mean(y * y, kernel) - mu_y * mu_y
    sigma_xy = _windowed_mean(x * y, kernel) - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return num / den


def ssim(a, b, params: SsimParams | None = None) -> float:
    """Mean local SSIM in [-1, 1]; 1.0 iff the images are identical."""
    return float(ssim_map(a, b, params).mean())
