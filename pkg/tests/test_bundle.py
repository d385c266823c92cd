"""Bundle codec round-trip, quantization tolerance, and corruption tests."""

import io
import zipfile

import numpy as np
import pytest

from xraykit import bundle as bd
from xraykit.builders import ClassifierConfig, build_classifier, init_params
from xraykit.errors import BundleLoadFailure, CorruptManifest, VersionMismatch, WeightCountMismatch
from xraykit.preprocess import PreprocessSpec


@pytest.fixture(scope="module")
def toy_bundle():
    cfg = ClassifierConfig(input_size=32, num_classes=3, stem_channels=6, growth=4, block_layers=(1, 1))
    graph = build_classifier(cfg)
    weights = init_params(graph, np.random.default_rng(42))
    b = bd.ModelBundle(
        graph=graph,
        weights=weights,
        preprocess=PreprocessSpec(target_size=32, mean=0.5, std=0.5),
        class_names=["a", "b", "c"],
        operating_points=[0.5, 0.35, 0.6],
        ood_metric="ssim",
        ood_threshold=0.4,
    )
    bd.attach_verification(b)
    return b


def test_round_trip_structural_equality(toy_bundle):
    data = bd.save_bundle(toy_bundle)
    loaded = bd.load_bundle(data)
    assert loaded.graph.to_dict() == toy_bundle.graph.to_dict()
    assert loaded.class_names == toy_bundle.class_names
    assert loaded.operating_points == toy_bundle.operating_points
    assert loaded.preprocess == toy_bundle.preprocess
    assert loaded.ood_metric == "ssim" and loaded.ood_threshold == 0.4
    assert np.array_equal(loaded.weights, toy_bundle.weights.astype(np.float32).astype(np.float64))


def test_save_load_save_byte_identical(toy_bundle):
    data = bd.save_bundle(toy_bundle)
    again = bd.save_bundle(bd.load_bundle(data))
    assert data == again


def test_quantization_round_trip_within_1e5(toy_bundle):
    images = bd.fixture_images()
    reference = [bd.predict_probs(toy_bundle, img) for img in images]
    loaded = bd.load_bundle(bd.save_bundle(toy_bundle))
    report = bd.verify_bundle(loaded, reference, images)
    assert report.max_abs_diff <= bd.VERIFY_TOLERANCE
    assert bd.verification_passes(report)
    assert sum(report.histogram) == 3 * 3  # three images x three classes


def test_perturbed_weights_fail_verification(toy_bundle):
    images = bd.fixture_images()
    reference = [bd.predict_probs(toy_bundle, img) for img in images]
    loaded = bd.load_bundle(bd.save_bundle(toy_bundle))
    loaded.weights = loaded.weights + 1e-2
    report = bd.verify_bundle(loaded, reference, images)
    assert not bd.verification_passes(report)


def test_self_verify_from_embedded_fixtures(toy_bundle):
    loaded = bd.load_bundle(bd.save_bundle(toy_bundle))
    report = bd.self_verify(loaded)
    assert bd.verification_passes(report)

    loaded.weights = loaded.weights * 1.01
    assert not bd.verification_passes(bd.self_verify(loaded))


def test_self_verify_requires_verification_block(toy_bundle):
    b = bd.ModelBundle(
        graph=toy_bundle.graph,
        weights=toy_bundle.weights,
        preprocess=toy_bundle.preprocess,
        class_names=toy_bundle.class_names,
        operating_points=toy_bundle.operating_points,
    )
    with pytest.raises(BundleLoadFailure):
        bd.self_verify(b)


def test_truncated_weight_blob(toy_bundle):
    data = bd.save_bundle(toy_bundle)
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        manifest = zf.read("manifest.json")
        weights = zf.read("weights.bin")
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("manifest.json", manifest)
        zf.writestr("weights.bin", weights[:-8])
    with pytest.raises(WeightCountMismatch):
        bd.load_bundle(buf.getvalue())


def test_version_mismatch(toy_bundle):
    data = bd.save_bundle(toy_bundle)
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        manifest = zf.read("manifest.json").decode()
        weights = zf.read("weights.bin")
    manifest = manifest.replace('"format_version":1', '"format_version":9')
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("manifest.json", manifest)
        zf.writestr("weights.bin", weights)
    with pytest.raises(VersionMismatch):
        bd.load_bundle(buf.getvalue())


def test_corrupt_containers():
    with pytest.raises(CorruptManifest):
        bd.load_bundle(b"definitely not a zip")
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("other.txt", "hi")
    with pytest.raises(CorruptManifest):
        bd.load_bundle(buf.getvalue())
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("manifest.json", "{not json")
        zf.writestr("weights.bin", b"")
    with pytest.raises(CorruptManifest):
        bd.load_bundle(buf.getvalue())


def test_operating_point_validation(toy_bundle):
    with pytest.raises(CorruptManifest):
        bd.ModelBundle(
            graph=toy_bundle.graph,
            weights=toy_bundle.weights,
            preprocess=toy_bundle.preprocess,
            class_names=["a", "b", "c"],
            operating_points=[0.5, 1.0, 0.5],
        )


def test_file_round_trip(tmp_path, toy_bundle):
    path = tmp_path / "m.bundle"
    bd.save_bundle_file(toy_bundle, path)
    loaded = bd.load_bundle_file(path)
    assert loaded.class_names == toy_bundle.class_names
