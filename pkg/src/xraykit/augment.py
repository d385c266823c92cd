"""Random rotation / translation / scaling augmentation.

A zero policy is the bit-exact identity. Transformed pixels are bilinearly
resampled; anything sampled from outside the frame reads as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .preprocess import Image


@dataclass
class AugmentationPolicy:
    max_rotation_deg: float = 0.0
    max_translation_frac: float = 0.0
    max_scale_frac: float = 0.0

    def __post_init__(self):
        if self.max_rotation_deg < 0:
            raise InvalidConfig("max_rotation_deg must be >= 0")
        if not 0.0 <= self.max_translation_frac < 1.0:
            raise InvalidConfig("max_translation_frac must be in [0, 1)")
        if not 0.0 <= self.max_scale_frac < 1.0:
            raise InvalidConfig("max_scale_frac must be in [0, 1)")

    @property
    def is_identity(self) -> bool:
        return self.max_rotation_deg == 0 and self.max_translation_frac == 0 and self.max_scale_frac == 0


# Table 1's augmentation ladder: identity up to 45 degrees / 15% / 15%.
LEVELS = (
    AugmentationPolicy(0.0, 0.0, 0.0),
    AugmentationPolicy(15.0, 0.05, 0.05),
    AugmentationPolicy(30.0, 0.10, 0.10),
    AugmentationPolicy(45.0, 0.15, 0.15),
)


def apply_affine(img: Image, angle_deg: float, tx: float, ty: float, scale: float) -> Image:
    """Rotate by angle_deg about the center, scale content by `scale`, and
    shift by (tx, ty) pixels; bilinear sampling with zero fill."""
    if scale <= 0:
        raise InvalidConfig("scale must be positive")
    h, w = img.height, img.width
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cx, cy = w / 2.0, h / 2.0

    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5 - cx - tx
    py = ys + 0.5 - cy - ty
    px /= scale
    py /= scale
    sx = cos_t * px - sin_t * py + cx - 0.5
    sy = sin_t * px + cos_t * py + cy - 0.5

    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx = sx - x0
    fy = sy - y0

    out = np.zeros_like(img.pixels)
    for c in range(img.channels):
        plane = img.pixels[:, :, c]
        acc = np.zeros((h, w))
        for dy, wy in ((0, 1 - fy), (1, fy)):
            for dx, wx in ((0, 1 - fx), (1, fx)):
                xi = x0 + dx
                yi = y0 + dy
                inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
                vals = np.where(inside, plane[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)], 0.0)
                acc += wy * wx * vals
        out[:, :, c] = acc
    return Image(np.clip(out, 0.0, 1.0))


def draw_params(policy: AugmentationPolicy, rng: np.random.Generator) -> tuple[float, float, float, float]:
    """(angle_deg, tx_frac, ty_frac, scale) drawn uniformly within the policy."""
    angle = rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg)
    tx = rng.uniform(-policy.max_translation_frac, policy.max_translation_frac)
    ty = rng.uniform(-policy.max_translation_frac, policy.max_translation_frac)
    scale = 1.0 + rng.uniform(-policy.max_scale_frac, policy.max_scale_frac)
    return angle, tx, ty, scale


def augment(img: Image, policy: AugmentationPolicy, rng: np.random.Generator) -> Image:
    """Draw rotation, per-axis translation, and scale uniformly within the
    policy bounds and apply them. Zero policy returns the input unchanged."""
    if policy.is_identity:
        return img
    angle, tx, ty, scale = draw_params(policy, rng)
    return apply_affine(img, angle, tx * img.width, ty * img.height, scale)
