"""Shared test utilities: finite-difference oracle and random graph factory.

The finite-difference gradient here is the independent oracle for the
engine's reverse mode: central differences on the scalar output, never
touching the engine's adjoint code.
"""

from __future__ import annotations

import numpy as np

from xraykit.graph import GraphSpec, LayerSpec, WeightLayout


def finite_diff(func, x: np.ndarray, coords, eps: float = 1e-4) -> dict:
    """Central-difference d func / d x[coord] for each flat coordinate."""
    flat = x.reshape(-1)
    out = {}
    for c in coords:
        xp = flat.copy()
        xm = flat.copy()
        xp[c] += eps
        xm[c] -= eps
        out[c] = (func(xp.reshape(x.shape)) - func(xm.reshape(x.shape))) / (2.0 * eps)
    return out


def rel_err(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_grad_against_fd(graph, weights, x, output_index, rng, n_coords=50, tol=1e-4, output_name=None):
    """Max relative error between grad_input and the finite-difference oracle."""
    from xraykit import engine

    g = engine.grad_input(graph, weights, x, output_index, output_name=output_name)
    name = output_name if output_name is not None else graph.outputs[0]

    def scalar(xv):
        out = engine.forward(graph, weights, xv)[name].reshape(-1)
        if output_index == engine.ALL:
            return float(out.sum())
        return float(out[output_index])

    coords = rng.choice(x.size, size=min(n_coords, x.size), replace=False)
    fd = finite_diff(scalar, x, coords)
    errs = [rel_err(g.reshape(-1)[c], fd[c]) for c in coords]
    return max(errs)


def init_weights(graph: GraphSpec, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random weights; batchnorm slots get identity-ish statistics."""
    layout = WeightLayout(graph)
    w = rng.normal(0.0, scale, size=layout.total)
    for layer in graph.layers:
        if layer.kind == "batchnorm":
            layout.view(w, layer.name, "gamma")[...] = rng.normal(1.0, 0.2, layout.view(w, layer.name, "gamma").shape)
            layout.view(w, layer.name, "beta")[...] = rng.normal(0.0, 0.2, layout.view(w, layer.name, "beta").shape)
            layout.view(w, layer.name, "running_mean")[...] = rng.normal(0.0, 0.3, layout.view(w, layer.name, "running_mean").shape)
            layout.view(w, layer.name, "running_var")[...] = rng.uniform(0.5, 1.5, layout.view(w, layer.name, "running_var").shape)
    return w


def single_layer_graph(kind: str, rng: np.random.Generator):
    """Minimal graph exercising one layer kind; returns (graph, weights, x)."""
    shape = (2, 6, 6)
    if kind == "conv2d":
        layer = LayerSpec("l", "conv2d", ["input"], {"out_channels": 3, "kernel": 3, "stride": 1, "padding": 1})
    elif kind == "dense":
        layer = LayerSpec("l", "dense", ["input"], {"units": 4})
    elif kind == "batchnorm":
        layer = LayerSpec("l", "batchnorm", ["input"], {"eps": 1e-5})
    elif kind in ("relu", "sigmoid", "tanh"):
        layer = LayerSpec("l", kind, ["input"])
    elif kind == "avgpool":
        layer = LayerSpec("l", "avgpool", ["input"], {"kernel": 2, "stride": 2})
    elif kind == "maxpool":
        layer = LayerSpec("l", "maxpool", ["input"], {"kernel": 2, "stride": 2})
    elif kind == "global_avg_pool":
        layer = LayerSpec("l", "global_avg_pool", ["input"])
    elif kind == "upsample_nearest":
        layer = LayerSpec("l", "upsample_nearest", ["input"], {"factor": 2})
    elif kind == "concat":
        g = GraphSpec(
            input_shape=shape,
            layers=[
                LayerSpec("a", "conv2d", ["input"], {"out_channels": 2, "kernel": 3, "padding": 1}),
                LayerSpec("b", "conv2d", ["input"], {"out_channels": 3, "kernel": 3, "padding": 1}),
                LayerSpec("l", "concat", ["a", "b"]),
            ],
            outputs=["l"],
        )
        g.validate()
        return g, init_weights(g, rng), rng.normal(0, 1, shape)
    else:
        raise ValueError(kind)
    g = GraphSpec(input_shape=shape, layers=[layer], outputs=["l"])
    g.validate()
    return g, init_weights(g, rng), rng.normal(0, 1, shape)


def random_graph(rng: np.random.Generator):
    """A small random DAG mixing spatial layers, a concat skip, and a head."""
    c = int(rng.integers(1, 3))
    hw = int(rng.choice([6, 8]))
    layers = []
    prev = "input"
    prev_shape = (c, hw, hw)
    n_spatial = int(rng.integers(1, 4))
    for i in range(n_spatial):
        kind = rng.choice(["conv2d", "relu", "tanh", "batchnorm", "avgpool", "maxpool", "upsample_nearest", "sigmoid"])
        name = f"s{i}"
        if kind == "conv2d":
            oc = int(rng.integers(1, 4))
            layers.append(LayerSpec(name, "conv2d", [prev], {"out_channels": oc, "kernel": 3, "stride": 1, "padding": 1}))
            prev_shape = (oc,) + prev_shape[1:]
        elif kind in ("avgpool", "maxpool"):
            if prev_shape[1] < 4 or prev_shape[1] % 2:
                layers.append(LayerSpec(name, "relu", [prev]))
            else:
                layers.append(LayerSpec(name, kind, [prev], {"kernel": 2, "stride": 2}))
                prev_shape = (prev_shape[0], prev_shape[1] // 2, prev_shape[2] // 2)
        elif kind == "upsample_nearest":
            if prev_shape[1] > 8:
                layers.append(LayerSpec(name, "relu", [prev]))
            else:
                layers.append(LayerSpec(name, "upsample_nearest", [prev], {"factor": 2}))
                prev_shape = (prev_shape[0], prev_shape[1] * 2, prev_shape[2] * 2)
        else:
            layers.append(LayerSpec(name, str(kind), [prev]))
        prev = name
    if rng.random() < 0.4:
        layers.append(LayerSpec("skipconv", "conv2d", [prev], {"out_channels": 2, "kernel": 1}))
        layers.append(LayerSpec("cat", "concat", [prev, "skipconv"]))
        prev = "cat"
        prev_shape = (prev_shape[0] + 2,) + prev_shape[1:]
    layers.append(LayerSpec("gap", "global_avg_pool", [prev]))
    layers.append(LayerSpec("head", "dense", ["gap"], {"units": int(rng.integers(2, 5))}))
    g = GraphSpec(input_shape=(c, hw, hw), layers=layers, outputs=["head"])
    g.validate()
    return g, init_weights(g, rng, scale=0.4), rng.normal(0, 1, (c, hw, hw))
