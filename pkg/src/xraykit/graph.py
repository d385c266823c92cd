"""Computation-graph description: layer specs, shape inference, weight layout.

A graph is an explicit DAG of layers over a single image input. Layers are
stored in topological order; each layer's inputs must be "input" or the name
of an earlier layer. Weights live in one flat vector whose layout follows
layer order, then parameter-slot declaration order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, MissingWeights, ShapeMismatch, UnsupportedLayer

INPUT = "input"

LAYER_KINDS = (
    "conv2d",
    "dense",
    "batchnorm",
    "relu",
    "sigmoid",
    "tanh",
    "avgpool",
    "maxpool",
    "global_avg_pool",
    "concat",
    "upsample_nearest",
)


@dataclass
class LayerSpec:
    name: str
    kind: str
    inputs: list[str]
    attrs: dict = field(default_factory=dict)
    # (param_name, shape) slots, filled in by GraphSpec.validate().
    param_slots: list[tuple[str, tuple[int, ...]]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "inputs": list(self.inputs),
            "attrs": dict(self.attrs),
            "params": [{"name": n, "shape": list(s)} for n, s in self.param_slots],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(
            name=str(d["name"]),
            kind=str(d["kind"]),
            inputs=[str(x) for x in d["inputs"]],
            attrs=dict(d.get("attrs", {})),
            param_slots=[(p["name"], tuple(int(x) for x in p["shape"])) for p in d.get("params", [])],
        )


def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ShapeMismatch(f"conv/pool output collapsed: size={size} k={kernel} s={stride} p={padding}")
    return out


def _infer_shape(layer: LayerSpec, in_shapes: list[tuple[int, ...]]) -> tuple[tuple[int, ...], list[tuple[str, tuple[int, ...]]]]:
    """Output shape (no batch dim) and parameter slots for one layer."""
    kind = layer.kind
    a = layer.attrs

    if kind == "conv2d":
        (c, h, w) = _expect_chw(in_shapes, layer)
        k, s, p = int(a["kernel"]), int(a.get("stride", 1)), int(a.get("padding", 0))
        o = int(a["out_channels"])
        if k < 1 or s < 1 or p < 0 or o < 1:
            raise InvalidConfig(f"bad conv2d attrs on {layer.name}: {a}")
        oh, ow = _conv_out(h, k, s, p), _conv_out(w, k, s, p)
        return (o, oh, ow), [("weight", (o, c, k, k)), ("bias", (o,))]

    if kind == "dense":
        if len(in_shapes) != 1:
            raise InvalidConfig(f"{layer.name}: dense takes one input")
        feats = int(np.prod(in_shapes[0]))
        if "output_shape" in a:
            out_shape = tuple(int(x) for x in a["output_shape"])
        else:
            out_shape = (int(a["units"]),)
        units = int(np.prod(out_shape))
        if units < 1:
            raise InvalidConfig(f"{layer.name}: dense output must be nonempty")
        return out_shape, [("weight", (units, feats)), ("bias", (units,))]

    if kind == "batchnorm":
        (c, *_rest) = _expect_channels_first(in_shapes, layer)
        slots = [("gamma", (c,)), ("beta", (c,)), ("running_mean", (c,)), ("running_var", (c,))]
        return in_shapes[0], slots

    if kind in ("relu", "sigmoid", "tanh"):
        if len(in_shapes) != 1:
            raise InvalidConfig(f"{layer.name}: {kind} takes one input")
        return in_shapes[0], []

    if kind in ("avgpool", "maxpool"):
        (c, h, w) = _expect_chw(in_shapes, layer)
        k = int(a["kernel"])
        s = int(a.get("stride", k))
        if k < 1 or s < 1:
            raise InvalidConfig(f"bad pool attrs on {layer.name}: {a}")
        if h < k or w < k:
            raise ShapeMismatch(f"{layer.name}: pool kernel {k} larger than input {h}x{w}")
        return (c, (h - k) // s + 1, (w - k) // s + 1), []

    if kind == "global_avg_pool":
        (c, _h, _w) = _expect_chw(in_shapes, layer)
        return (c,), []

    if kind == "concat":
        if len(in_shapes) < 2:
            raise InvalidConfig(f"{layer.name}: concat needs at least two inputs")
        base = in_shapes[0]
        for s in in_shapes[1:]:
            if len(s) != len(base) or s[1:] != base[1:]:
                raise ShapeMismatch(f"{layer.name}: concat inputs must agree beyond channels: {in_shapes}")
        return (sum(s[0] for s in in_shapes),) + base[1:], []

    if kind == "upsample_nearest":
        (c, h, w) = _expect_chw(in_shapes, layer)
        f = int(a["factor"])
        if f < 1:
            raise InvalidConfig(f"{layer.name}: upsample factor must be >= 1")
        return (c, h * f, w * f), []

    raise UnsupportedLayer(f"unknown layer kind {kind!r} on {layer.name}")


def _expect_chw(in_shapes, layer):
    if len(in_shapes) != 1 or len(in_shapes[0]) != 3:
        raise ShapeMismatch(f"{layer.name}: expected one (C,H,W) input, got {in_shapes}")
    return in_shapes[0]


def _expect_channels_first(in_shapes, layer):
    if len(in_shapes) != 1 or len(in_shapes[0]) < 1:
        raise ShapeMismatch(f"{layer.name}: expected one channels-first input, got {in_shapes}")
    return in_shapes[0]


@dataclass
class GraphSpec:
    input_shape: tuple[int, ...]
    layers: list[LayerSpec]
    outputs: list[str]

    def __post_init__(self):
        self.input_shape = tuple(int(x) for x in self.input_shape)
        self._shapes: dict[str, tuple[int, ...]] | None = None

    def validate(self) -> dict[str, tuple[int, ...]]:
        """Check wiring, infer every activation shape, fill parameter slots."""
        if any(x < 1 for x in self.input_shape):
            raise InvalidConfig(f"bad input shape {self.input_shape}")
        shapes: dict[str, tuple[int, ...]] = {INPUT: self.input_shape}
        for layer in self.layers:
            if layer.name == INPUT or layer.name in shapes:
                raise InvalidConfig(f"duplicate or reserved layer name {layer.name!r}")
            if not layer.inputs:
                raise InvalidConfig(f"{layer.name}: no inputs wired")
            missing = [i for i in layer.inputs if i not in shapes]
            if missing:
                raise InvalidConfig(f"{layer.name}: inputs {missing} not defined earlier (graph must be a DAG)")
            in_shapes = [shapes[i] for i in layer.inputs]
            out_shape, slots = _infer_shape(layer, in_shapes)
            layer.param_slots = slots
            shapes[layer.name] = out_shape
        for out in self.outputs:
            if out not in shapes:
                raise InvalidConfig(f"declared output {out!r} is not a layer")
        self._shapes = shapes
        return shapes

    def shapes(self) -> dict[str, tuple[int, ...]]:
        if self._shapes is None:
            return self.validate()
        return self._shapes

    def to_dict(self) -> dict:
        self.shapes()
        return {
            "input_shape": list(self.input_shape),
            "layers": [l.to_dict() for l in self.layers],
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        g = cls(
            input_shape=tuple(int(x) for x in d["input_shape"]),
            layers=[LayerSpec.from_dict(x) for x in d["layers"]],
            outputs=[str(x) for x in d["outputs"]],
        )
        g.validate()
        return g


class WeightLayout:
    """Flat-vector layout: layer order, then slot declaration order."""

    def __init__(self, graph: GraphSpec):
        graph.shapes()
        self.entries: list[tuple[str, str, tuple[int, ...], int]] = []  # (layer, param, shape, offset)
        offset = 0
        for layer in graph.layers:
            for pname, shape in layer.param_slots:
                self.entries.append((layer.name, pname, shape, offset))
                offset += int(np.prod(shape))
        self.total = offset
        self._index = {(l, p): (s, o) for l, p, s, o in self.entries}

    def view(self, weights: np.ndarray, layer: str, param: str) -> np.ndarray:
        shape, offset = self._index[(layer, param)]
        n = int(np.prod(shape))
        return weights[offset : offset + n].reshape(shape)

    def params_of(self, weights: np.ndarray, layer: LayerSpec) -> dict[str, np.ndarray]:
        return {p: self.view(weights, layer.name, p) for p, _ in layer.param_slots}

    def check(self, weights: np.ndarray | None):
        if weights is None:
            raise MissingWeights("weights are required")
        if weights.ndim != 1 or weights.shape[0] != self.total:
            raise MissingWeights(f"expected {self.total} weights, got {getattr(weights, 'shape', None)}")
