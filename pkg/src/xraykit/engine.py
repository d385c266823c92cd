"""Graph executor: forward inference and reverse-mode gradients.

Inference runs in float64. The public `forward` takes a single sample shaped
like the graph's input; `forward_batch` takes (N, *input_shape) and is what
the trainers use. `backward` propagates output-side gradients to the input
and to every parameter slot, so both input saliency and weight training sit
on the same adjoints.
"""

from __future__ import annotations

import numpy as np

from . import layers as L
from .errors import BadClassIndex, ShapeMismatch
from .graph import INPUT, GraphSpec, WeightLayout

# Sentinel for "gradient of the sum of all output coordinates".
ALL = "all"


def _as_batch(graph: GraphSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape == graph.input_shape:
        return x[None]
    raise ShapeMismatch(f"input shape {x.shape} does not match graph input {graph.input_shape}")


def run_forward(graph: GraphSpec, weights: np.ndarray, xb: np.ndarray):
    """Batched forward keeping per-layer caches; returns (acts, caches)."""
    layout = WeightLayout(graph)
    layout.check(weights)
    if xb.shape[1:] != graph.input_shape:
        raise ShapeMismatch(f"batch shape {xb.shape[1:]} does not match graph input {graph.input_shape}")
    acts: dict[str, np.ndarray] = {INPUT: xb}
    caches: dict[str, object] = {}
    for layer in graph.layers:
        xs = [acts[i] for i in layer.inputs]
        params = layout.params_of(weights, layer)
        y, cache = L.forward(layer.kind, xs, params, layer.attrs)
        acts[layer.name] = y
        caches[layer.name] = cache
    return acts, caches


def forward(graph: GraphSpec, weights: np.ndarray, x: np.ndarray) -> dict[str, np.ndarray]:
    """All named activations (including the final outputs) for one sample."""
    acts, _ = run_forward(graph, weights, _as_batch(graph, x))
    return {name: a[0] for name, a in acts.items()}


def forward_batch(graph: GraphSpec, weights: np.ndarray, xb: np.ndarray) -> dict[str, np.ndarray]:
    acts, _ = run_forward(graph, weights, np.asarray(xb, dtype=np.float64))
    return acts


def backward(
    graph: GraphSpec,
    weights: np.ndarray,
    acts: dict[str, np.ndarray],
    caches: dict[str, object],
    out_grads: dict[str, np.ndarray],
):
    """Reverse pass from output-side gradients.

    Returns (grad wrt input batch, flat grad wrt the weight vector).
    """
    layout = WeightLayout(graph)
    grads: dict[str, np.ndarray] = {}
    for name, g in out_grads.items():
        if name not in acts:
            raise ShapeMismatch(f"unknown output {name!r} in seed gradients")
        if g.shape != acts[name].shape:
            raise ShapeMismatch(f"seed gradient for {name!r} has shape {g.shape}, activation {acts[name].shape}")
        grads[name] = g.astype(np.float64, copy=True)
    gweights = np.zeros_like(weights)
    for layer in reversed(graph.layers):
        gy = grads.pop(layer.name, None)
        if gy is None:
            continue
        params = layout.params_of(weights, layer)
        gxs, gparams = L.backward(layer.kind, gy, caches[layer.name], params)
        for inp, gx in zip(layer.inputs, gxs):
            if inp in grads:
                grads[inp] += gx
            else:
                grads[inp] = gx
        for pname, gp in gparams.items():
            layout.view(gweights, layer.name, pname)[...] += gp
    ginput = grads.get(INPUT)
    if ginput is None:
        ginput = np.zeros(acts[INPUT].shape, dtype=np.float64)
    return ginput, gweights


def grad_input(
    graph: GraphSpec,
    weights: np.ndarray,
    x: np.ndarray,
    output_index: int | str = ALL,
    output_name: str | None = None,
) -> np.ndarray:
    """Exact gradient of one output coordinate (or the sum over all of them)
    with respect to every input element; same shape as the input.

    `output_index` selects a coordinate of the flattened named output;
    pass ALL to differentiate the sum of all coordinates. The default output
    is the first name declared by the graph.
    """
    xb = _as_batch(graph, x)
    acts, caches = run_forward(graph, weights, xb)
    name = output_name if output_name is not None else graph.outputs[0]
    if name not in acts:
        raise ShapeMismatch(f"graph has no output named {name!r}")
    out = acts[name]
    seed = np.zeros_like(out)
    if output_index == ALL or output_index is None:
        seed[...] = 1.0
    else:
        idx = int(output_index)
        flat_len = int(np.prod(out.shape[1:]))
        if not 0 <= idx < flat_len:
            raise BadClassIndex(f"output index {idx} out of range for output of size {flat_len}")
        seed.reshape(seed.shape[0], -1)[:, idx] = 1.0
    ginput, _ = backward(graph, weights, acts, caches, {name: seed})
    return ginput[0]
