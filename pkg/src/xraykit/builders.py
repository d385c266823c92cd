"""Graph builders for the toy classifier, autoencoder, and discriminator.

The classifier is DenseNet-flavored at desk scale: a conv stem, dense blocks
whose layers concatenate onto the running feature stack, 1x1-conv + avgpool
transitions, and a CAM-compatible global-avg-pool -> dense head ending in
per-class sigmoids. The autoencoder is a strided-conv encoder to a flat
latent and an upsample-conv decoder back to the input size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .graph import INPUT, GraphSpec, LayerSpec, WeightLayout


@dataclass
class GraphModel:
    """A graph paired with a concrete weight vector."""

    graph: GraphSpec
    weights: np.ndarray


@dataclass
class ClassifierConfig:
    input_size: int = 32
    num_classes: int = 4
    stem_channels: int = 8
    growth: int = 6
    block_layers: tuple[int, ...] = (2, 2)
    compression: float = 0.5

    def __post_init__(self):
        if self.input_size < 8 or self.num_classes < 1:
            raise InvalidConfig("classifier needs input_size >= 8 and at least one class")
        if self.growth < 1 or not self.block_layers or any(n < 1 for n in self.block_layers):
            raise InvalidConfig("dense blocks need positive layer counts and growth")
        if not 0.0 < self.compression <= 1.0:
            raise InvalidConfig("compression must be in (0, 1]")


@dataclass
class AutoencoderConfig:
    input_size: int = 64
    latent_dim: int = 128
    channels: tuple[int, ...] = (8, 16, 32)

    def __post_init__(self):
        if self.latent_dim < 1:
            raise InvalidConfig("latent_dim must be positive")
        if self.input_size % (2 ** len(self.channels)) != 0:
            raise InvalidConfig(
                f"input_size {self.input_size} must be divisible by {2 ** len(self.channels)}"
            )

    @property
    def bottleneck(self) -> int:
        return self.input_size // (2 ** len(self.channels))


@dataclass
class DiscriminatorConfig:
    input_size: int = 64
    latent_dim: int = 128
    hidden: tuple[int, ...] = (256, 64)

    def __post_init__(self):
        if not self.hidden:
            raise InvalidConfig("discriminator needs at least one hidden layer")


def build_classifier(cfg: ClassifierConfig) -> GraphSpec:
    layers: list[LayerSpec] = [
        LayerSpec("stem_conv", "conv2d", [INPUT], {"out_channels": cfg.stem_channels, "kernel": 3, "stride": 1, "padding": 1}),
        LayerSpec("stem_relu", "relu", ["stem_conv"]),
    ]
    prev = "stem_relu"
    channels = cfg.stem_channels
    for b, n_layers in enumerate(cfg.block_layers):
        for i in range(n_layers):
            conv = f"b{b}_l{i}_conv"
            act = f"b{b}_l{i}_relu"
            cat = f"b{b}_l{i}_cat"
            layers.append(LayerSpec(conv, "conv2d", [prev], {"out_channels": cfg.growth, "kernel": 3, "stride": 1, "padding": 1}))
            layers.append(LayerSpec(act, "relu", [conv]))
            layers.append(LayerSpec(cat, "concat", [prev, act]))
            prev = cat
            channels += cfg.growth
        if b < len(cfg.block_layers) - 1:
            out_c = max(1, int(channels * cfg.compression))
            layers.append(LayerSpec(f"t{b}_conv", "conv2d", [prev], {"out_channels": out_c, "kernel": 1}))
            layers.append(LayerSpec(f"t{b}_relu", "relu", [f"t{b}_conv"]))
            layers.append(LayerSpec(f"t{b}_pool", "avgpool", [f"t{b}_relu"], {"kernel": 2, "stride": 2}))
            prev = f"t{b}_pool"
            channels = out_c
    layers.append(LayerSpec("gap", "global_avg_pool", [prev]))
    layers.append(LayerSpec("logits", "dense", ["gap"], {"units": cfg.num_classes}))
    layers.append(LayerSpec("probs", "sigmoid", ["logits"]))
    g = GraphSpec(input_shape=(1, cfg.input_size, cfg.input_size), layers=layers, outputs=["logits", "probs"])
    g.validate()
    return g


def build_autoencoder(cfg: AutoencoderConfig) -> tuple[GraphSpec, GraphSpec]:
    """(encoder, decoder): image -> latent and latent -> reconstruction."""
    enc_layers: list[LayerSpec] = []
    prev = INPUT
    for i, c in enumerate(cfg.channels):
        conv = f"enc_conv{i}"
        act = f"enc_relu{i}"
        enc_layers.append(LayerSpec(conv, "conv2d", [prev], {"out_channels": c, "kernel": 3, "stride": 2, "padding": 1}))
        enc_layers.append(LayerSpec(act, "relu", [conv]))
        prev = act
    enc_layers.append(LayerSpec("latent", "dense", [prev], {"units": cfg.latent_dim}))
    encoder = GraphSpec(input_shape=(1, cfg.input_size, cfg.input_size), layers=enc_layers, outputs=["latent"])
    encoder.validate()

    s = cfg.bottleneck
    cs = list(cfg.channels)[::-1]  # e.g. (32, 16, 8)
    dec_layers: list[LayerSpec] = [
        LayerSpec("dec_dense", "dense", [INPUT], {"output_shape": [cs[0], s, s]}),
        LayerSpec("dec_relu0", "relu", ["dec_dense"]),
    ]
    prev = "dec_relu0"
    for i in range(len(cs)):
        out_c = cs[i + 1] if i + 1 < len(cs) else 1
        up = f"dec_up{i}"
        conv = f"dec_conv{i}"
        dec_layers.append(LayerSpec(up, "upsample_nearest", [prev], {"factor": 2}))
        dec_layers.append(LayerSpec(conv, "conv2d", [up], {"out_channels": out_c, "kernel": 3, "stride": 1, "padding": 1}))
        if i + 1 < len(cs):
            act = f"dec_relu{i + 1}"
            dec_layers.append(LayerSpec(act, "relu", [conv]))
            prev = act
        else:
            dec_layers.append(LayerSpec("reconstruction", "sigmoid", [conv]))
    decoder = GraphSpec(input_shape=(cfg.latent_dim,), layers=dec_layers, outputs=["reconstruction"])
    decoder.validate()
    return encoder, decoder


def build_discriminator(cfg: DiscriminatorConfig) -> GraphSpec:
    """MLP over a flattened (image, latent) pair."""
    layers: list[LayerSpec] = []
    prev = INPUT
    for i, h in enumerate(cfg.hidden):
        layers.append(LayerSpec(f"disc_dense{i}", "dense", [prev], {"units": h}))
        layers.append(LayerSpec(f"disc_relu{i}", "relu", [f"disc_dense{i}"]))
        prev = f"disc_relu{i}"
    layers.append(LayerSpec("logit", "dense", [prev], {"units": 1}))
    layers.append(LayerSpec("prob", "sigmoid", ["logit"]))
    g = GraphSpec(
        input_shape=(cfg.input_size * cfg.input_size + cfg.latent_dim,),
        layers=layers,
        outputs=["logit", "prob"],
    )
    g.validate()
    return g


def compose_autoencoder(encoder: GraphSpec, decoder: GraphSpec) -> GraphSpec:
    """Single image -> (latent, reconstruction) graph; weights are the
    encoder vector followed by the decoder vector."""
    enc_d = encoder.to_dict()
    dec_d = decoder.to_dict()
    layers = [LayerSpec.from_dict(l) for l in enc_d["layers"]]
    latent_name = encoder.outputs[0]
    for ld in dec_d["layers"]:
        spec = LayerSpec.from_dict(ld)
        spec.inputs = [latent_name if i == INPUT else i for i in spec.inputs]
        layers.append(spec)
    g = GraphSpec(input_shape=encoder.input_shape, layers=layers, outputs=[latent_name, decoder.outputs[0]])
    g.validate()
    return g


def split_autoencoder(graph: GraphSpec, weights: np.ndarray) -> tuple[GraphModel, GraphModel]:
    """Inverse of compose_autoencoder for a composed graph with a `latent` layer."""
    names = [l.name for l in graph.layers]
    if "latent" not in names:
        raise InvalidConfig("composed autoencoder must contain a layer named 'latent'")
    cut = names.index("latent") + 1
    d = graph.to_dict()
    enc = GraphSpec(
        input_shape=graph.input_shape,
        layers=[LayerSpec.from_dict(l) for l in d["layers"][:cut]],
        outputs=["latent"],
    )
    enc.validate()
    latent_shape = enc.shapes()["latent"]
    dec_layers = []
    for ld in d["layers"][cut:]:
        spec = LayerSpec.from_dict(ld)
        spec.inputs = [INPUT if i == "latent" else i for i in spec.inputs]
        dec_layers.append(spec)
    dec = GraphSpec(input_shape=latent_shape, layers=dec_layers, outputs=[graph.outputs[-1]])
    dec.validate()
    n_enc = WeightLayout(enc).total
    return GraphModel(enc, np.asarray(weights[:n_enc])), GraphModel(dec, np.asarray(weights[n_enc:]))


def init_params(graph: GraphSpec, rng: np.random.Generator) -> np.ndarray:
    """He-style initialization; biases zero, batchnorm slots identity."""
    layout = WeightLayout(graph)
    w = np.zeros(layout.total)
    for layer in graph.layers:
        for pname, shape in layer.param_slots:
            view = layout.view(w, layer.name, pname)
            if pname == "weight":
                fan_in = int(np.prod(shape[1:]))
                view[...] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            elif pname in ("gamma", "running_var"):
                view[...] = 1.0
            # bias / beta / running_mean stay zero
    return w
