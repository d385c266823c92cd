"""Deterministic image ingestion: decode, grayscale, scale-and-crop, normalize.

Also houses the cross-pipeline prediction-difference analysis used to compare
two preprocessing paths feeding the same model.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import MalformedImage, ShapeMismatch, UnsupportedFormat

# BT.601 luminance weights for RGB -> gray.
_LUMA = np.array([0.299, 0.587, 0.114])

DIFF_HISTOGRAM_RANGE = 0.25
DIFF_HISTOGRAM_BUCKETS = 25


@dataclass
class Image:
    """A decoded image: float intensities in [0,1], shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim == 2:
            self.pixels = self.pixels[:, :, None]
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in (1, 3):
            raise ShapeMismatch(f"expected (H, W, 1|3) pixels, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ShapeMismatch("image must be at least 1x1")
        if not np.all(np.isfinite(self.pixels)):
            raise ShapeMismatch("image intensities must be finite")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ShapeMismatch("image intensities must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass
class PreprocessSpec:
    """Fixed input geometry and normalization constants carried by a bundle."""

    target_size: int = 64
    mean: float = 0.5
    std: float = 0.5
    grayscale: bool = True

    def __post_init__(self):
        if self.target_size < 8:
            raise ShapeMismatch("target_size must be >= 8")
        if self.std <= 0:
            raise ShapeMismatch("std must be > 0")

    def to_dict(self) -> dict:
        return {
            "target_size": self.target_size,
            "mean": self.mean,
            "std": self.std,
            "grayscale": self.grayscale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessSpec":
        return cls(
            target_size=int(d["target_size"]),
            mean=float(d["mean"]),
            std=float(d["std"]),
            grayscale=bool(d["grayscale"]),
        )


@dataclass
class DiffReport:
    """Element-wise |a-b| summary between two prediction sets."""

    per_class_differences: list[float]
    mean_abs_diff: float
    max_abs_diff: float
    histogram: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "per_class_differences": self.per_class_differences,
                "mean_abs_diff": self.mean_abs_diff,
                "max_abs_diff": self.max_abs_diff,
                "histogram": self.histogram,
            },
            sort_keys=True,
        )


def decode_image(data: bytes) -> Image:
    """Decode PNG (8-bit gray or RGB) or binary PGM (P5) bytes to an Image.

    Intensities are mapped to [0,1] by dividing by the container's max value
    (255 for 8-bit PNG).
    """
    if data[:2] == b"P5":
        return _decode_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(data)
    raise UnsupportedFormat("expected PNG or binary PGM (P5) bytes")


def _decode_png(data: bytes) -> Image:
    try:
        with PILImage.open(io.BytesIO(data)) as img:
            img.load()
            if img.mode in ("LA", "PA"):
                img = img.convert("L")
            elif img.mode in ("RGBA", "P"):
                img = img.convert("RGB")
            if img.mode not in ("L", "RGB"):
                raise UnsupportedFormat(f"unsupported PNG mode {img.mode}")
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except UnsupportedFormat:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise MalformedImage(f"undecodable PNG: {exc}") from exc
    return Image(arr)


def _decode_pgm(data: bytes) -> Image:
    # Header: "P5" <w> <h> <maxval> single-whitespace, then raw bytes.
    # '#' comments may appear between tokens.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedImage("truncated PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise MalformedImage(f"bad PGM header token {data[start:pos]!r}") from exc
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise MalformedImage("PGM dimensions must be positive")
    if not 0 < maxval < 256:
        raise UnsupportedFormat(f"only 8-bit PGM supported, maxval={maxval}")
    raw = data[pos : pos + width * height]
    if len(raw) < width * height:
        raise MalformedImage("PGM pixel data truncated")
    arr = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / maxval
    return Image(arr.reshape(height, width, 1))


def to_grayscale(img: Image) -> Image:
    """Collapse RGB to single-channel luminance (BT.601); identity on grayscale."""
    if img.channels == 1:
        return img
    return Image((img.pixels @ _LUMA)[:, :, None])


def resize_plane(plane: np.ndarray, out_h: int, out_w: int, interpolation: str) -> np.ndarray:
    """Resize one (H, W) plane with half-pixel-center sampling coordinates."""
    in_h, in_w = plane.shape
    if (in_h, in_w) == (out_h, out_w):
        return plane.copy()
    src_y = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    src_x = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    if interpolation == "nearest":
        iy = np.clip(np.rint(src_y).astype(int), 0, in_h - 1)
        ix = np.clip(np.rint(src_x).astype(int), 0, in_w - 1)
        return plane[np.ix_(iy, ix)]
    if interpolation != "bilinear":
        raise UnsupportedFormat(f"unknown interpolation {interpolation!r}")
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    ty = src_y - y0
    tx = src_x - x0
    y0c = np.clip(y0, 0, in_h - 1)
    y1c = np.clip(y0 + 1, 0, in_h - 1)
    x0c = np.clip(x0, 0, in_w - 1)
    x1c = np.clip(x0 + 1, 0, in_w - 1)
    top = plane[np.ix_(y0c, x0c)] * (1 - tx) + plane[np.ix_(y0c, x1c)] * tx
    bot = plane[np.ix_(y1c, x0c)] * (1 - tx) + plane[np.ix_(y1c, x1c)] * tx
    return top * (1 - ty)[:, None] + bot * ty[:, None]


def resize(img: Image, out_h: int, out_w: int, interpolation: str = "bilinear") -> Image:
    planes = [
        resize_plane(img.pixels[:, :, c], out_h, out_w, interpolation)
        for c in range(img.channels)
    ]
    return Image(np.clip(np.stack(planes, axis=2), 0.0, 1.0))


def scale_and_crop(img: Image, spec: PreprocessSpec, interpolation: str = "bilinear") -> Image:
    """Scale the shorter side to target_size (aspect preserved), then center-crop.

    Identity on images already at target_size x target_size.
    """
    t = spec.target_size
    if img.height == t and img.width == t:
        return img
    short = min(img.height, img.width)
    scale = t / short
    new_h = int(round(img.height * scale))
    new_w = int(round(img.width * scale))
    scaled = resize(img, new_h, new_w, interpolation)
    off_y = (new_h - t) // 2
    off_x = (new_w - t) // 2
    return Image(scaled.pixels[off_y : off_y + t, off_x : off_x + t, :])


def normalize(img: Image, spec: PreprocessSpec) -> np.ndarray:
    """Map a grayscale image at target size to a (1, S, S) tensor: (x - mean) / std."""
    if img.channels != 1:
        raise ShapeMismatch("normalize expects a grayscale image")
    if img.height != spec.target_size or img.width != spec.target_size:
        raise ShapeMismatch(
            f"expected {spec.target_size}x{spec.target_size}, got {img.height}x{img.width}"
        )
    x = (img.pixels[:, :, 0] - spec.mean) / spec.std
    return x[None, :, :]


def preprocess_image(img: Image, spec: PreprocessSpec, interpolation: str = "bilinear") -> np.ndarray:
    """Full ingestion chain: grayscale -> scale_and_crop -> normalize."""
    if spec.grayscale:
        img = to_grayscale(img)
    img = scale_and_crop(img, spec, interpolation)
    return normalize(img, spec)


def compare_pipelines(preds_a, preds_b) -> DiffReport:
    """Element-wise |a-b| between two (n_samples, n_classes) prediction sets.

    Histogram is fixed-width over [0, 0.25] with 25 buckets; differences above
    the range are counted in the last bucket so counts always sum to
    samples x classes.
    """
    a = np.asarray(preds_a, dtype=np.float64)
    b = np.asarray(preds_b, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if a.shape != b.shape:
        raise ShapeMismatch(f"prediction shapes differ: {a.shape} vs {b.shape}")
    diffs = np.abs(a - b)
    width = DIFF_HISTOGRAM_RANGE / DIFF_HISTOGRAM_BUCKETS
    idx = np.minimum((diffs / width).astype(int), DIFF_HISTOGRAM_BUCKETS - 1)
    hist = np.bincount(idx.ravel(), minlength=DIFF_HISTOGRAM_BUCKETS)
    return DiffReport(
        per_class_differences=[float(v) for v in diffs.mean(axis=0)],
        mean_abs_diff=float(diffs.mean()),
        max_abs_diff=float(diffs.max()),
        histogram=[int(c) for c in hist],
    )
