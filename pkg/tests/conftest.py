"""Session-scoped trained models shared by explanation, service, and
acceptance tests. Training is seeded, so every run sees identical bundles."""

import time

import pytest

from xraykit.builders import AutoencoderConfig, ClassifierConfig
from xraykit.pipeline import make_autoencoder_bundle, make_classifier_bundle
from xraykit.synthetic import sample_dataset
from xraykit.training import OptimizerConfig

CLF_SEED = 11
CLF_DATA_SEED = 501
AE_SEED = 7
AE_DATA_SEED = 2024


@pytest.fixture(scope="session")
def clf_fixture():
    dataset = sample_dataset(240, 2, seed=CLF_DATA_SEED, size=32)
    cfg = ClassifierConfig(input_size=32, num_classes=2, stem_channels=12, growth=8, block_layers=(2, 2, 2))
    bundle, history = make_classifier_bundle(
        dataset,
        cfg,
        opt=OptimizerConfig(lr=0.01, plateau_patience=5),
        epochs=14,
        batch_size=24,
        seed=CLF_SEED,
    )
    return {"bundle": bundle, "history": history, "dataset": dataset, "cfg": cfg}


@pytest.fixture(scope="session")
def phantoms_500():
    return sample_dataset(500, 2, seed=AE_DATA_SEED, size=64)


@pytest.fixture(scope="session")
def ae_fixture(phantoms_500):
    cfg = AutoencoderConfig(input_size=64, latent_dim=64, channels=(8, 16, 32))
    start = time.perf_counter()
    bundle, history = make_autoencoder_bundle(
        phantoms_500,
        cfg,
        opt=OptimizerConfig(lr=0.002),
        epochs=5,
        batch_size=50,
        seed=AE_SEED,
        metric="ssim",
        percentile=95.0,
    )
    seconds = time.perf_counter() - start
    return {"bundle": bundle, "history": history, "train_seconds": seconds, "cfg": cfg}


@pytest.fixture(scope="session")
def bundle_paths(tmp_path_factory, clf_fixture, ae_fixture):
    from xraykit.bundle import save_bundle_file

    root = tmp_path_factory.mktemp("bundles")
    clf_path = root / "classifier.bundle"
    ae_path = root / "autoencoder.bundle"
    save_bundle_file(clf_fixture["bundle"], clf_path)
    save_bundle_file(ae_fixture["bundle"], ae_path)
    return {"clf": clf_path, "ae": ae_path}
