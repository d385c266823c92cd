"""Synthetic phantom and out-of-distribution image generators.

Phantoms are smooth chest-like ellipses on a dark background with optional
bright lesion blobs, one canonical location per class. Everything is
deterministic in (generator id, seed), so dataset manifests only need seed
lists and label flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .preprocess import Image

PHANTOM_GENERATOR_ID = "phantom-v1"
OOD_FAMILIES = ("noise", "stripes", "inverted", "blank")


@dataclass
class SyntheticSample:
    image: Image
    labels: list[bool]
    provenance: dict
    # per flagged class: {"class": c, "cy": .., "cx": .., "r": ..} in pixels
    lesions: list[dict] = field(default_factory=list)


def class_names(num_classes: int) -> list[str]:
    return [f"opacity_{i:02d}" for i in range(num_classes)]


def _smoothstep(d: np.ndarray, sharpness: float = 8.0) -> np.ndarray:
    # ~1 inside (d < 1), ~0 outside, smooth transition around d = 1
    return 1.0 / (1.0 + np.exp((d - 1.0) * sharpness))


def gen_phantom(seed: int, lesion_flags, size: int = 64) -> SyntheticSample:
    """Deterministic thorax phantom with one bright blob per flagged class."""
    flags = [bool(f) for f in lesion_flags]
    n_classes = len(flags)
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size]
    u = (xs + 0.5) / size
    v = (ys + 0.5) / size

    cx = 0.5 + rng.uniform(-0.02, 0.02)
    cy = 0.52 + rng.uniform(-0.02, 0.02)
    ax = rng.uniform(0.30, 0.36)
    ay = rng.uniform(0.38, 0.44)
    body_amp = rng.uniform(0.5, 0.6)

    d_body = ((u - cx) / ax) ** 2 + ((v - cy) / ay) ** 2
    img = 0.04 + body_amp * _smoothstep(d_body)

    # lungs: two darker ellipses inside the thorax
    for lx in (cx - 0.16, cx + 0.16):
        d_lung = ((u - lx) / (0.11 + rng.uniform(0, 0.02))) ** 2 + ((v - cy + 0.02) / (0.22 + rng.uniform(0, 0.02))) ** 2
        img -= 0.22 * _smoothstep(d_lung, 6.0)

    # spine: bright vertical band through the center
    img += 0.12 * np.exp(-(((u - cx) / 0.045) ** 2))

    # lesion geometry is drawn for every class so the per-class placement is
    # stable whatever the flags say; only flagged blobs are painted
    lesions = []
    for c in range(n_classes):
        theta = -np.pi / 2 + 2 * np.pi * c / max(n_classes, 1)
        bx = cx + 0.17 * np.cos(theta) + rng.uniform(-0.02, 0.02)
        by = cy + 0.20 * np.sin(theta) + rng.uniform(-0.02, 0.02)
        r = rng.uniform(0.05, 0.08)
        amp = rng.uniform(0.24, 0.32)
        if flags[c]:
            d2 = ((u - bx) ** 2 + (v - by) ** 2) / (r * r)
            img += amp * np.exp(-d2)
            lesions.append({"class": c, "cy": by * size, "cx": bx * size, "r": r * size})

    img += rng.uniform(-0.01, 0.01, size=(size, size))
    img = np.clip(img, 0.0, 1.0)

    return SyntheticSample(
        image=Image(img[:, :, None]),
        labels=flags,
        provenance={"generator": PHANTOM_GENERATOR_ID, "seed": int(seed)},
        lesions=lesions,
    )


def gen_ood(seed: int, family: str, size: int = 64) -> Image:
    """An image from one synthetic out-of-distribution family."""
    rng = np.random.default_rng(seed)
    if family == "noise":
        return Image(rng.uniform(0.0, 1.0, size=(size, size, 1)))
    if family == "stripes":
        ys, xs = np.mgrid[0:size, 0:size]
        theta = rng.uniform(0, np.pi)
        freq = rng.uniform(3, 8)
        phase = rng.uniform(0, 2 * np.pi)
        t = (xs * np.cos(theta) + ys * np.sin(theta)) / size
        img = 0.5 + 0.5 * np.sin(2 * np.pi * freq * t + phase)
        return Image(img[:, :, None])
    if family == "inverted":
        phantom = gen_phantom(seed, [False], size=size)
        return Image(1.0 - phantom.image.pixels)
    if family == "blank":
        return Image(np.zeros((size, size, 1)))
    raise InvalidConfig(f"unknown OOD family {family!r}, expected one of {OOD_FAMILIES}")


def sample_dataset(n: int, num_classes: int, seed: int, size: int = 64, flag_prob: float = 0.5) -> list[SyntheticSample]:
    """n phantoms with independent Bernoulli(flag_prob) labels, seeded."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        s = int(rng.integers(0, 2**31 - 1))
        flags = (rng.random(num_classes) < flag_prob).tolist()
        samples.append(gen_phantom(s, flags, size=size))
    return samples


def dataset_manifest(n: int, num_classes: int, seed: int, size: int = 64, flag_prob: float = 0.5) -> dict:
    """JSON-ready manifest (seed list + flags); byte-identical for a fixed seed."""
    rng = np.random.default_rng(seed)
    entries = []
    for _ in range(n):
        s = int(rng.integers(0, 2**31 - 1))
        flags = (rng.random(num_classes) < flag_prob).tolist()
        entries.append({"seed": s, "flags": flags})
    return {
        "generator": PHANTOM_GENERATOR_ID,
        "size": size,
        "class_names": class_names(num_classes),
        "samples": entries,
    }


def manifest_to_json(manifest: dict) -> str:
    return json.dumps(manifest, sort_keys=True, separators=(",", ": "), indent=None)


def load_manifest_samples(manifest: dict) -> list[SyntheticSample]:
    size = int(manifest["size"])
    return [gen_phantom(int(e["seed"]), e["flags"], size=size) for e in manifest["samples"]]
