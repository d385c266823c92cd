"""Command-line interface: train / eval / predict / explain / verify / serve.

Exit codes: 0 success, 2 validation or usage error, 1 runtime failure.
Every command writes its artifact (bundle, JSON report, PNG) to --out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import engine
from .augment import LEVELS, augment
from .builders import AutoencoderConfig, ClassifierConfig
from .bundle import (
    load_bundle_file,
    save_bundle_file,
    self_verify,
    verification_passes,
    verify_bundle,
)
from .errors import (
    CorruptManifest,
    EmptyScores,
    InvalidConfig,
    InvalidOperatingPoint,
    MalformedImage,
    ShapeMismatch,
    UnsupportedFormat,
    VersionMismatch,
    WeightCountMismatch,
    XrayKitError,
)
from .evaluation import bootstrap_auc, retention_curve, separation_auc
from .explain import explanation_overlay
from .pipeline import ae_scores, make_autoencoder_bundle, make_classifier_bundle, predict_response
from .pngio import encode_rgba_png
from .preprocess import Image, decode_image, preprocess_image
from .synthetic import OOD_FAMILIES, dataset_manifest, gen_ood, load_manifest_samples, manifest_to_json
from .training import OptimizerConfig, split_dataset

VALIDATION_ERRORS = (
    InvalidConfig,
    UnsupportedFormat,
    MalformedImage,
    ShapeMismatch,
    CorruptManifest,
    VersionMismatch,
    WeightCountMismatch,
    EmptyScores,
    InvalidOperatingPoint,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _bundle_path(args) -> Path:
    path = getattr(args, "bundle", None) or os.environ.get("XRAY_BUNDLE")
    if not path:
        raise InvalidConfig("no bundle given: pass --bundle or set XRAY_BUNDLE")
    return Path(path)


def _load_dataset(path):
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    samples = load_manifest_samples(manifest)
    if not samples:
        raise InvalidConfig(f"dataset manifest {path} holds no samples")
    return manifest, samples


def _load_image(path) -> Image:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_history(path, history) -> None:
    if not path:
        return
    with open(path, "w", encoding="utf-8") as fh:
        for row in history:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _optimizer(args, beta1: float = 0.9) -> OptimizerConfig:
    return OptimizerConfig(lr=args.lr, beta1=beta1, plateau_patience=getattr(args, "patience", 3))


def cmd_gen_data(args) -> int:
    manifest = dataset_manifest(args.n, args.classes, seed=args.seed, size=args.size)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(manifest_to_json(manifest) + "\n")
    print(f"wrote {args.n}-sample manifest to {args.out}")
    return 0


def cmd_train_clf(args) -> int:
    manifest, samples = _load_dataset(args.data)
    num_classes = len(manifest["class_names"])
    cfg = ClassifierConfig(
        input_size=args.input_size,
        num_classes=num_classes,
        stem_channels=args.stem_channels,
        growth=args.growth,
        block_layers=tuple(int(x) for x in args.blocks.split(",")),
    )
    policy = LEVELS[args.aug_level] if args.aug_level else None
    bundle, history = make_classifier_bundle(
        samples,
        cfg,
        opt=_optimizer(args),
        policy=policy,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        class_names=manifest["class_names"],
    )
    save_bundle_file(bundle, args.out)
    _write_history(args.history, history)
    print(f"trained classifier ({num_classes} classes) -> {args.out}; final val AUC {history[-1]['val_auc']:.3f}")
    return 0


def _train_ae_common(args, adversarial: bool) -> int:
    _manifest, samples = _load_dataset(args.data)
    cfg = AutoencoderConfig(input_size=args.input_size, latent_dim=args.latent)
    beta1 = 0.5 if adversarial else 0.9
    bundle, history = make_autoencoder_bundle(
        samples,
        cfg,
        opt=OptimizerConfig(lr=args.lr, beta1=beta1),
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        metric=args.metric,
        percentile=args.percentile,
        adversarial=adversarial,
        recon_weight=getattr(args, "recon_weight", 0.0),
        halt_threshold=getattr(args, "halt_threshold", 0.3),
    )
    save_bundle_file(bundle, args.out)
    _write_history(args.history, history)
    print(f"trained {'adversarial' if adversarial else 'L2'} autoencoder -> {args.out}; "
          f"gate {bundle.ood_metric} @ {bundle.ood_threshold:.5f}")
    return 0


def cmd_train_ae(args) -> int:
    return _train_ae_common(args, adversarial=False)


def cmd_train_ali(args) -> int:
    return _train_ae_common(args, adversarial=True)


def cmd_eval(args) -> int:
    bundle = load_bundle_file(_bundle_path(args))
    _manifest, samples = _load_dataset(args.data)
    xb = np.stack([preprocess_image(s.image, bundle.preprocess) for s in samples])
    probs = engine.forward_batch(bundle.graph, bundle.weights, xb)[bundle.prob_output()]
    labels = np.asarray([s.labels for s in samples], dtype=int)
    per_class = {}
    for c, name in enumerate(bundle.class_names):
        if labels[:, c].min() == labels[:, c].max():
            per_class[name] = None
        else:
            est = bootstrap_auc(probs[:, c], labels[:, c], n_splits=args.n_splits,
                                split_fraction=args.split_fraction, seed=args.seed)
            per_class[name] = est.to_dict()
    report = {"n_samples": len(samples), "per_class_auc": per_class}
    _write_json(args.out, report)
    print(f"wrote eval report to {args.out}")
    return 0


def cmd_ood_eval(args) -> int:
    bundle = load_bundle_file(_bundle_path(args))
    _manifest, samples = _load_dataset(args.data)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for fam in families:
        if fam not in OOD_FAMILIES:
            raise InvalidConfig(f"unknown OOD family {fam!r}")
    in_images = [s.image for s in samples]
    metrics = ("latent_l2", "recon_l1", "recon_l2", "ssim")
    in_scores = {m: ae_scores(bundle, in_images, m) for m in metrics}
    report = {}
    for fam in families:
        out_images = [gen_ood(seed, fam, size=args.size) for seed in range(args.n_ood)]
        report[fam] = {
            m: separation_auc(in_scores[m], ae_scores(bundle, out_images, m), kind=m) for m in metrics
        }
    _write_json(args.out, {"separation_auc": report, "n_in": len(samples), "n_ood": args.n_ood})
    print(f"wrote OOD separation report to {args.out}")
    return 0


def cmd_retention(args) -> int:
    clf = load_bundle_file(_bundle_path(args))
    ood_bundle = load_bundle_file(args.ood_bundle)
    _manifest, samples = _load_dataset(args.data)
    metric = ood_bundle.ood_metric or "ssim"
    scores = ae_scores(ood_bundle, [s.image for s in samples], metric)
    xb = np.stack([preprocess_image(s.image, clf.preprocess) for s in samples])
    probs = engine.forward_batch(clf.graph, clf.weights, xb)[clf.prob_output()]
    labels = np.asarray([s.labels for s in samples], dtype=int)
    c = args.class_index
    if not 0 <= c < len(clf.class_names):
        raise InvalidConfig(f"class index {c} out of range")
    points = retention_curve(scores, probs[:, c], labels[:, c], n_cutoffs=args.n_cutoffs, kind=metric)
    _write_json(args.out, {
        "metric": metric,
        "class_name": clf.class_names[c],
        "points": [p.to_dict() for p in points],
    })
    print(f"wrote retention curve ({len(points)} points) to {args.out}")
    return 0


def cmd_aug_matrix(args) -> int:
    from .evaluation import augmentation_matrix

    _manifest, samples = _load_dataset(args.data)
    levels = [int(x) for x in args.levels.split(",")]
    for lv in levels:
        if not 0 <= lv < len(LEVELS):
            raise InvalidConfig(f"augmentation level {lv} out of range 0..{len(LEVELS) - 1}")
    num_classes = len(_manifest["class_names"])
    train, _val, test = split_dataset(samples, args.seed)

    bundles = []
    for lv in levels:
        cfg = ClassifierConfig(input_size=args.input_size, num_classes=num_classes,
                               stem_channels=args.stem_channels, growth=args.growth,
                               block_layers=tuple(int(x) for x in args.blocks.split(",")))
        b, _ = make_classifier_bundle(samples, cfg, opt=_optimizer(args),
                                      policy=LEVELS[lv] if lv else None,
                                      epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
        bundles.append(b)

    test_sets = []
    for j, lv in enumerate(levels):
        rng = np.random.default_rng(args.seed + 1000 + j)
        policy = LEVELS[lv]
        if policy.is_identity:
            test_sets.append(test)
        else:
            augmented = []
            for s in test:
                img = augment(s.image, policy, rng)
                augmented.append(type(s)(image=img, labels=s.labels, provenance=s.provenance))
            test_sets.append(augmented)

    def predictor_for(b):
        def predict(batch):
            xb = np.stack([preprocess_image(s.image, b.preprocess) for s in batch])
            return engine.forward_batch(b.graph, b.weights, xb)[b.prob_output()]
        return predict

    matrix = augmentation_matrix(
        [predictor_for(b) for b in bundles],
        test_sets,
        row_labels=[f"train_level_{lv}" for lv in levels],
        col_labels=[f"test_level_{lv}" for lv in levels],
    )
    _write_json(args.out, matrix)
    print(f"wrote {len(levels)}x{len(levels)} augmentation matrix to {args.out}")
    return 0


def cmd_predict(args) -> int:
    clf = load_bundle_file(_bundle_path(args))
    ood_bundle = load_bundle_file(args.ood_bundle) if args.ood_bundle else None
    image = _load_image(args.image)
    response = predict_response(clf, image, ood_bundle, gate_enabled=not args.no_gate)
    payload = json.dumps(response, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    return 0


def cmd_explain(args) -> int:
    clf = load_bundle_file(_bundle_path(args))
    image = _load_image(args.image)
    class_index = engine.ALL if args.class_index.lower() == "all" else int(args.class_index)
    overlay = explanation_overlay(clf, image, class_index, args.method)
    if args.composite:
        rgb = overlay.composite()
        rgba = np.concatenate([rgb, np.ones(rgb.shape[:2] + (1,))], axis=2)
    else:
        rgba = overlay.to_rgba()
    Path(args.out).write_bytes(encode_rgba_png(rgba))
    print(f"wrote {args.method} overlay for class {args.class_index} to {args.out}")
    return 0


def cmd_verify(args) -> int:
    bundle = load_bundle_file(_bundle_path(args))
    if args.images:
        if not args.reference:
            ref_path = Path(args.images) / "reference_predictions.json"
        else:
            ref_path = Path(args.reference)
        with open(ref_path, "r", encoding="utf-8") as fh:
            reference = json.load(fh)
        image_files = sorted(p for p in Path(args.images).iterdir() if p.suffix in (".png", ".pgm"))
        images = [_load_image(p) for p in image_files]
        if len(images) != len(reference):
            raise InvalidConfig(f"{len(images)} images but {len(reference)} reference rows")
        report = verify_bundle(bundle, reference, images)
    else:
        report = self_verify(bundle)
    ok = verification_passes(report)
    print(f"max prediction difference: {report.max_abs_diff:.3g} "
          f"(tolerance 1e-05) -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    cfg = ServiceConfig(
        bundle_path=_bundle_path(args),
        ood_bundle_path=args.ood_bundle,
        host=args.host,
        port=args.port,
        max_upload_bytes=args.max_upload,
        gate_enabled=not args.no_gate,
    )
    print(f"serving on http://{cfg.host}:{cfg.port} (gate {'on' if cfg.gate_enabled else 'off'})")
    serve(cfg)
    return 0


def _add_train_common(p, default_epochs):
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="output bundle path")
    p.add_argument("--epochs", type=int, default=default_epochs)
    p.add_argument("--batch-size", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--history", help="optional JSON-lines training history path")


def _add_clf_arch(p):
    p.add_argument("--input-size", type=int, default=32)
    p.add_argument("--stem-channels", type=int, default=12)
    p.add_argument("--growth", type=int, default=8)
    p.add_argument("--blocks", default="2,2,2", help="comma-separated dense-block layer counts")
    p.add_argument("--patience", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xraykit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a deterministic phantom dataset manifest")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-clf", help="train the multi-label classifier")
    _add_train_common(p, default_epochs=14)
    _add_clf_arch(p)
    p.add_argument("--aug-level", type=int, default=0, choices=range(len(LEVELS)))
    p.set_defaults(func=cmd_train_clf, lr=0.01)

    p = sub.add_parser("train-ae", help="train the L2 autoencoder gate")
    _add_train_common(p, default_epochs=5)
    p.add_argument("--input-size", type=int, default=64)
    p.add_argument("--latent", type=int, default=128)
    p.add_argument("--metric", default="ssim", choices=("latent_l2", "recon_l1", "recon_l2", "ssim"))
    p.add_argument("--percentile", type=float, default=95.0)
    p.set_defaults(func=cmd_train_ae, lr=0.002, batch_size=50)

    p = sub.add_parser("train-ali", help="train the adversarial autoencoder gate")
    _add_train_common(p, default_epochs=5)
    p.add_argument("--input-size", type=int, default=64)
    p.add_argument("--latent", type=int, default=128)
    p.add_argument("--metric", default="ssim", choices=("latent_l2", "recon_l1", "recon_l2", "ssim"))
    p.add_argument("--percentile", type=float, default=95.0)
    p.add_argument("--recon-weight", type=float, default=0.0)
    p.add_argument("--halt-threshold", type=float, default=0.3)
    p.set_defaults(func=cmd_train_ali, lr=0.0005, batch_size=50)

    p = sub.add_parser("eval", help="bootstrap per-class AUC of a classifier bundle")
    p.add_argument("--bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-splits", type=int, default=10)
    p.add_argument("--split-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ood-eval", help="separation AUC of an AE bundle vs OOD families")
    p.add_argument("--bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--families", default="noise,stripes,inverted")
    p.add_argument("--n-ood", type=int, default=100)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ood_eval)

    p = sub.add_parser("retention", help="task AUC on OOD-admitted subsets")
    p.add_argument("--bundle")
    p.add_argument("--ood-bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--class-index", type=int, default=0)
    p.add_argument("--n-cutoffs", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retention)

    p = sub.add_parser("aug-matrix", help="train/test augmentation robustness matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", default="0,1")
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--batch-size", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.01)
    _add_clf_arch(p)
    p.set_defaults(func=cmd_aug_matrix)

    p = sub.add_parser("predict", help="classify one image (with optional OOD gate)")
    p.add_argument("--bundle")
    p.add_argument("--image", required=True)
    p.add_argument("--ood-bundle")
    p.add_argument("--no-gate", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="write a saliency or CAM overlay PNG")
    p.add_argument("--bundle")
    p.add_argument("--image", required=True)
    p.add_argument("--class", dest="class_index", default="all", help="class id or 'all'")
    p.add_argument("--method", default="saliency", choices=("saliency", "cam"))
    p.add_argument("--composite", action="store_true", help="flatten the overlay onto the image")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("verify", help="check stored predictions at the 1e-5 tolerance")
    p.add_argument("--bundle")
    p.add_argument("--images", help="directory of fixture images")
    p.add_argument("--reference", help="reference predictions JSON")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="run the local HTTP service")
    p.add_argument("--bundle")
    p.add_argument("--ood-bundle")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8417)
    p.add_argument("--max-upload", type=int, default=16 * 1024 * 1024)
    p.add_argument("--no-gate", action="store_true")
    p.set_defaults(func=cmd_serve)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except XrayKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
