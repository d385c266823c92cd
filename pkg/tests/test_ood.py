"""OOD scoring and gate tests with contrived autoencoders."""

import numpy as np
import pytest

from xraykit.builders import GraphModel
from xraykit.errors import EmptyScores, InvalidConfig, ShapeMismatch
from xraykit.graph import GraphSpec, LayerSpec, WeightLayout
from xraykit.ood import (
    OodVerdict,
    calibrate_threshold,
    decide,
    gate_image,
    higher_is_in_distribution,
    reconstruct,
    score_latent_distance,
)
from xraykit.preprocess import Image

SIZE = 16  # >= ssim window


def identity_autoencoder(bias: float = 0.0):
    """Encoder flattens via an identity dense map; decoder restores it."""
    n = SIZE * SIZE
    enc_g = GraphSpec((1, SIZE, SIZE), [LayerSpec("latent", "dense", ["input"], {"units": n})], ["latent"])
    enc_g.validate()
    enc_w = np.zeros(WeightLayout(enc_g).total)
    WeightLayout(enc_g).view(enc_w, "latent", "weight")[...] = np.eye(n)
    dec_g = GraphSpec((n,), [LayerSpec("recon", "dense", ["input"], {"output_shape": [1, SIZE, SIZE]})], ["recon"])
    dec_g.validate()
    dec_w = np.zeros(WeightLayout(dec_g).total)
    WeightLayout(dec_g).view(dec_w, "recon", "weight")[...] = np.eye(n)
    WeightLayout(dec_g).view(dec_w, "recon", "bias")[...] = bias
    return GraphModel(enc_g, enc_w), GraphModel(dec_g, dec_w)


def zero_encoder(latent_dim=4):
    g = GraphSpec((1, SIZE, SIZE), [LayerSpec("latent", "dense", ["input"], {"units": latent_dim})], ["latent"])
    g.validate()
    return GraphModel(g, np.zeros(WeightLayout(g).total))


def test_perfect_identity_ae_scores():
    enc, dec = identity_autoencoder()
    rng = np.random.default_rng(0)
    img = Image(rng.uniform(0.1, 0.9, (SIZE, SIZE, 1)))
    res = reconstruct(enc, dec, img)
    assert np.allclose(res.error_map, 0.0, atol=1e-12)
    assert res.scores["ssim"] == 1.0
    assert res.scores["recon_l1"] < 1e-12 and res.scores["recon_l2"] < 1e-12


def test_constant_offset_reconstruction_scores():
    enc, dec = identity_autoencoder(bias=0.1)
    img = Image(np.full((SIZE, SIZE, 1), 0.4))
    res = reconstruct(enc, dec, img)
    assert abs(res.scores["recon_l1"] - 0.1) < 1e-9
    assert abs(res.scores["recon_l2"] - 0.01) < 1e-9


def test_reconstruct_shape_mismatch():
    enc, dec = identity_autoencoder()
    with pytest.raises(ShapeMismatch):
        reconstruct(enc, dec, Image(np.zeros((SIZE + 2, SIZE, 1))))


def test_latent_distance_examples():
    enc = zero_encoder()
    img = Image(np.full((SIZE, SIZE, 1), 0.5))
    assert score_latent_distance(enc, img) == 0.0

    g = enc.graph
    w = np.zeros(WeightLayout(g).total)
    WeightLayout(g).view(w, "latent", "bias")[...] = [1.0, 0.0, 0.0, 0.0]
    unit = GraphModel(g, w)
    assert score_latent_distance(unit, img) == 1.0

    rng = np.random.default_rng(1)
    w2 = w.copy()
    latent = rng.normal(size=4)
    WeightLayout(g).view(w2, "latent", "bias")[...] = latent
    got = score_latent_distance(GraphModel(g, w2), img)
    assert abs(got - np.sqrt((latent**2).sum())) < 1e-12


def test_latent_distance_empirical_mean_option():
    g = zero_encoder().graph
    w = np.zeros(WeightLayout(g).total)
    WeightLayout(g).view(w, "latent", "bias")[...] = [3.0, 0.0, 0.0, 0.0]
    model = GraphModel(g, w)
    img = Image(np.full((SIZE, SIZE, 1), 0.5))
    assert score_latent_distance(model, img, mean=[3.0, 0.0, 0.0, 0.0]) == 0.0


def test_threshold_quantile_examples():
    assert calibrate_threshold(np.arange(1, 101, dtype=float), "recon_l2", 95.0) == 95.0
    assert calibrate_threshold([0.7], "recon_l1", 95.0) == 0.7
    # ssim flips orientation: 95th-stringency threshold is the 5th percentile
    scores = np.arange(1, 101, dtype=float)
    assert calibrate_threshold(scores, "ssim", 95.0) == 5.0


def test_threshold_quantile_matches_hand_interpolation():
    # inverse empirical CDF with interpolation: h = p*n, x_(h) 1-indexed
    rng = np.random.default_rng(2)
    scores = np.sort(rng.uniform(size=17))
    for pct in (50.0, 90.0, 95.0):
        h = pct / 100.0 * len(scores)
        k = int(np.floor(h))
        if k < 1:
            expect = scores[0]
        elif k >= len(scores):
            expect = scores[-1]
        else:
            g = h - k
            expect = scores[k - 1] + g * (scores[k] - scores[k - 1])
        assert abs(calibrate_threshold(scores, "recon_l2", pct) - expect) < 1e-12


def test_empty_scores():
    with pytest.raises(EmptyScores):
        calibrate_threshold([], "recon_l2")


def test_decide_directions_and_tie():
    assert decide(0.01, 0.05, "recon_l2").admitted
    assert not decide(0.2, 0.6, "ssim").admitted
    assert decide(0.05, 0.05, "recon_l2").admitted  # tie admits
    assert decide(0.6, 0.6, "ssim").admitted
    v = decide(0.9, 0.5, "recon_l1")
    assert v == OodVerdict(admitted=False, metric="recon_l1", score=0.9, threshold=0.5)


def test_monotone_gate_property():
    rng = np.random.default_rng(3)
    for _ in range(100):
        score = rng.uniform(0, 1)
        t1 = rng.uniform(0, 1)
        t2 = t1 + rng.uniform(0, 0.5)
        if decide(score, t1, "recon_l2").admitted:
            assert decide(score, t2, "recon_l2").admitted


def test_unknown_metric_kind():
    with pytest.raises(InvalidConfig):
        higher_is_in_distribution("energy")
    with pytest.raises(InvalidConfig):
        decide(0.5, 0.5, "mahalanobis")


def test_gate_image_end_to_end():
    enc, dec = identity_autoencoder()
    img = Image(np.random.default_rng(4).uniform(0.2, 0.8, (SIZE, SIZE, 1)))
    verdict, result = gate_image(enc, dec, img, "ssim", threshold=0.9)
    assert verdict.admitted and result.scores["ssim"] == 1.0
