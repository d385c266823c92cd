"""Prediction explanations: rectified input-gradient saliency, class
activation maps from the GAP->dense head, bilinear CAM upsampling, and
red-over-transparent overlay rendering.

Gradients are taken with respect to the pre-sigmoid logits, so the maps
describe the raw class evidence rather than the squashed probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .bundle import ModelBundle
from .errors import BadClassIndex, IncompatibleHead, InvalidConfig, ShapeMismatch
from .graph import GraphSpec, WeightLayout
from .preprocess import Image, preprocess_image, resize_plane, scale_and_crop, to_grayscale

OVERLAY_PERCENTILE = 99.0
ALPHA_FLOOR = 0.05


@dataclass
class SaliencyMap:
    values: np.ndarray  # (H, W), rectified, >= 0
    class_index: int | str


@dataclass
class CamMap:
    values: np.ndarray  # (H', W') at last-conv resolution
    class_index: int
    upsampled: np.ndarray | None = None


@dataclass
class OverlayImage:
    base: Image
    red: np.ndarray  # (H, W) normalized heat in [0, 1]
    alpha: np.ndarray  # (H, W), 0 below the transparency floor

    def to_rgba(self) -> np.ndarray:
        """Overlay-only RGBA (red heat on transparency) for compositing."""
        h, w = self.red.shape
        rgba = np.zeros((h, w, 4))
        rgba[:, :, 0] = self.red
        rgba[:, :, 3] = self.alpha
        return rgba

    def composite(self) -> np.ndarray:
        """Overlay flattened onto the grayscale base, (H, W, 3) in [0, 1]."""
        gray = self.base.pixels[:, :, 0]
        out = np.stack([gray, gray, gray], axis=2)
        a = self.alpha[:, :, None]
        heat = np.stack([self.red, np.zeros_like(self.red), np.zeros_like(self.red)], axis=2)
        return (1 - a) * out + a * heat


def _check_class_index(bundle: ModelBundle, class_index) -> None:
    if class_index == engine.ALL:
        return
    if not isinstance(class_index, (int, np.integer)) or not 0 <= int(class_index) < bundle.num_classes:
        raise BadClassIndex(f"class index {class_index!r} out of range for {bundle.num_classes} classes")


def saliency(bundle: ModelBundle, image: Image, class_index) -> SaliencyMap:
    """max(0, d logit / d pixel) over the preprocessed input.

    `class_index` may be a class id or engine.ALL for the summed logits.
    """
    _check_class_index(bundle, class_index)
    x = preprocess_image(image, bundle.preprocess)
    grad = engine.grad_input(bundle.graph, bundle.weights, x, class_index, output_name=bundle.logit_output())
    return SaliencyMap(values=np.maximum(grad[0], 0.0), class_index=class_index)


def cam_head(graph: GraphSpec, logit_name: str):
    """Locate the (features, gap, dense) chain or raise IncompatibleHead."""
    by_name = {l.name: l for l in graph.layers}
    dense = by_name.get(logit_name)
    if dense is None or dense.kind != "dense" or len(dense.inputs) != 1:
        raise IncompatibleHead(f"output {logit_name!r} is not a single-input dense layer")
    gap = by_name.get(dense.inputs[0])
    if gap is None or gap.kind != "global_avg_pool":
        raise IncompatibleHead("the dense head must read directly from a global_avg_pool layer")
    return gap.inputs[0], dense


def cam(bundle: ModelBundle, image: Image, class_index: int) -> CamMap:
    """Class activation map: per-location sum of filter activations weighted
    by the dense row that links each filter to the class."""
    if class_index == engine.ALL:
        raise BadClassIndex("class activation maps are per-class; pass a class id")
    _check_class_index(bundle, class_index)
    features_name, dense = cam_head(bundle.graph, bundle.logit_output())
    x = preprocess_image(image, bundle.preprocess)
    acts = engine.forward(bundle.graph, bundle.weights, x)
    features = acts[features_name]  # (K, H', W')
    wrow = WeightLayout(bundle.graph).view(bundle.weights, dense.name, "weight")[int(class_index)]
    values = np.einsum("k,khw->hw", wrow, features)
    return CamMap(values=values, class_index=int(class_index))


def upsample_cam(cam_map: CamMap, target_size: int) -> CamMap:
    """Bilinear (half-pixel-center) upsampling to the input resolution."""
    up = resize_plane(cam_map.values, target_size, target_size, "bilinear")
    return CamMap(values=cam_map.values, class_index=cam_map.class_index, upsampled=up)


def render_overlay(values: np.ndarray, base: Image) -> OverlayImage:
    """Normalize heat by its 99th-percentile value; pixels whose normalized
    impact falls below the floor are fully transparent."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (base.height, base.width):
        raise ShapeMismatch(f"map shape {v.shape} does not match base {base.height}x{base.width}")
    top = float(np.percentile(v, OVERLAY_PERCENTILE))
    if top <= 0.0:
        top = float(v.max())  # sparse maps: the percentile collapses to zero
    if top <= 0.0:
        norm = np.zeros_like(v)
    else:
        norm = np.clip(v / top, 0.0, 1.0)
    alpha = np.where(norm >= ALPHA_FLOOR, norm, 0.0)
    return OverlayImage(base=base, red=norm, alpha=alpha)


def explanation_overlay(bundle: ModelBundle, image: Image, class_index, method: str) -> OverlayImage:
    """Full chain used by the service: map -> (upsample) -> overlay on the
    preprocessed square view of the image."""
    base = scale_and_crop(to_grayscale(image), bundle.preprocess)
    if method == "saliency":
        values = saliency(bundle, image, class_index).values
    elif method == "cam":
        values = upsample_cam(cam(bundle, image, class_index), bundle.input_size).upsampled
    else:
        raise InvalidConfig(f"unknown explanation method {method!r}")
    return render_overlay(np.maximum(values, 0.0), base)
