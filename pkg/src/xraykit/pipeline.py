"""High-level glue: train models, calibrate them, and package bundles.

This is what the CLI commands and the service fixtures sit on: classifier
training ends with per-class operating points from the validation split;
autoencoder training ends with an OOD threshold calibrated on training-set
scores. Both attach fixture verification before serialization.
"""

from __future__ import annotations

import numpy as np

from . import engine
from .augment import AugmentationPolicy
from .builders import AutoencoderConfig, ClassifierConfig, split_autoencoder
from .bundle import ModelBundle, attach_verification
from .errors import InvalidConfig
from .evaluation import optimal_operating_point, roc_curve
from .ood import reconstruct
from .preprocess import Image, PreprocessSpec, preprocess_image
from .synthetic import SyntheticSample, class_names as default_class_names
from .training import (
    OptimizerConfig,
    split_dataset,
    train_adversarial,
    train_autoencoder_l2,
    train_classifier,
)


def make_classifier_bundle(
    dataset: list[SyntheticSample],
    cfg: ClassifierConfig,
    opt: OptimizerConfig | None = None,
    policy: AugmentationPolicy | None = None,
    epochs: int = 10,
    batch_size: int = 16,
    seed: int = 0,
    class_names: list[str] | None = None,
) -> tuple[ModelBundle, list[dict]]:
    """Train the toy classifier and package it with calibrated operating points."""
    graph, weights, history = train_classifier(
        dataset, cfg, opt=opt, policy=policy, epochs=epochs, batch_size=batch_size, seed=seed
    )
    spec = PreprocessSpec(target_size=cfg.input_size, mean=0.5, std=0.5)
    _train, val, _test = split_dataset(dataset, seed)
    xv = np.stack([preprocess_image(s.image, spec) for s in val])
    yv = np.asarray([s.labels for s in val], dtype=int)
    probs = engine.forward_batch(graph, weights, xv)["probs"]
    points = []
    for c in range(cfg.num_classes):
        if yv[:, c].min() == yv[:, c].max():
            points.append(0.5)  # no signal in the split; neutral anchor
        else:
            points.append(optimal_operating_point(roc_curve(probs[:, c], yv[:, c])).opt)
    bundle = ModelBundle(
        graph=graph,
        weights=weights,
        preprocess=spec,
        class_names=class_names or default_class_names(cfg.num_classes),
        operating_points=points,
    )
    attach_verification(bundle)
    return bundle, history


def ae_scores(bundle: ModelBundle, images: list[Image], metric: str) -> np.ndarray:
    """OOD scores of raw images through an autoencoder bundle."""
    enc, dec = split_autoencoder(bundle.graph, bundle.weights)
    out = []
    for img in images:
        x = preprocess_image(img, bundle.preprocess)
        out.append(reconstruct(enc, dec, x[0]).scores[metric])
    return np.asarray(out)


def make_autoencoder_bundle(
    dataset: list[SyntheticSample],
    cfg: AutoencoderConfig,
    opt: OptimizerConfig | None = None,
    epochs: int = 30,
    batch_size: int = 25,
    seed: int = 0,
    metric: str = "ssim",
    percentile: float = 95.0,
    adversarial: bool = False,
    recon_weight: float = 0.0,
    halt_threshold: float = 0.3,
) -> tuple[ModelBundle, list[dict]]:
    """Train the autoencoder (L2 or adversarial) and calibrate its gate."""
    from .ood import calibrate_threshold

    if adversarial:
        graph, weights, history = train_adversarial(
            dataset,
            cfg,
            opt=opt,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
            recon_weight=recon_weight,
            halt_threshold=halt_threshold,
        )
    else:
        graph, weights, history = train_autoencoder_l2(
            dataset, cfg, opt=opt, epochs=epochs, batch_size=batch_size, seed=seed
        )
    bundle = ModelBundle(
        graph=graph,
        weights=weights,
        preprocess=PreprocessSpec(target_size=cfg.input_size, mean=0.0, std=1.0),
        class_names=[],
        operating_points=[],
    )
    scores = ae_scores(bundle, [s.image for s in dataset], metric)
    bundle.ood_metric = metric
    bundle.ood_threshold = calibrate_threshold(scores, metric, percentile)
    attach_verification(bundle, output_name="latent")
    return bundle, history


def run_gate(ood_bundle: ModelBundle, image: Image):
    """Reconstruct through the OOD bundle and decide; returns (verdict, result)."""
    from .ood import decide

    if ood_bundle.ood_metric is None:
        raise InvalidConfig("OOD bundle carries no calibrated threshold")
    enc, dec = split_autoencoder(ood_bundle.graph, ood_bundle.weights)
    x = preprocess_image(image, ood_bundle.preprocess)
    recon = reconstruct(enc, dec, x[0])
    verdict = decide(recon.scores[ood_bundle.ood_metric], ood_bundle.ood_threshold, ood_bundle.ood_metric)
    return verdict, recon


def predict_response(
    clf: ModelBundle,
    image: Image,
    ood_bundle: ModelBundle | None = None,
    gate_enabled: bool = True,
) -> dict:
    """The /predict payload: OOD verdict first, class probabilities only for
    admitted images, calibrated exactly through each class's operating point.

    A rejected image gets the reconstruction error map inlined as a base64
    PNG artifact instead of any diagnosis."""
    import base64

    from .evaluation import calibrate
    from .pngio import encode_heatmap_png

    verdict_dict = None
    if ood_bundle is not None and gate_enabled:
        verdict, recon = run_gate(ood_bundle, image)
        verdict_dict = verdict.to_dict()
        if not verdict.admitted:
            verdict_dict["error_map_png_base64"] = base64.b64encode(encode_heatmap_png(recon.error_map)).decode("ascii")
            return {"ood": verdict_dict, "predictions": None}

    from .bundle import predict_probs

    probs = predict_probs(clf, image)
    predictions = []
    for c, name in enumerate(clf.class_names):
        opt_c = clf.operating_points[c]
        predictions.append(
            {
                "name": name,
                "raw_probability": float(probs[c]),
                "calibrated_probability": float(calibrate(float(probs[c]), opt_c)),
                "operating_point": float(opt_c),
            }
        )
    return {"ood": verdict_dict, "predictions": predictions}
