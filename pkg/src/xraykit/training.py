"""Trainers: supervised multi-label classifier, L2 autoencoder, and the
adversarially trained autoencoder with its stabilization tricks.

All trainers run Adam on float64 weights, raise Divergence on non-finite
losses, and record per-epoch history rows suitable for JSON-lines export.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .augment import AugmentationPolicy, augment
from .builders import (
    AutoencoderConfig,
    ClassifierConfig,
    DiscriminatorConfig,
    GraphModel,
    build_autoencoder,
    build_classifier,
    build_discriminator,
    compose_autoencoder,
    init_params,
    split_autoencoder,
)
from .errors import Divergence, InvalidConfig
from .evaluation import auc_scores
from .graph import GraphSpec, WeightLayout
from .preprocess import PreprocessSpec, preprocess_image
from .synthetic import SyntheticSample

# GAN label smoothing ranges: real pairs and fake pairs.
POSITIVE_LABEL_RANGE = (0.7, 1.1)
NEGATIVE_LABEL_RANGE = (-0.1, 0.3)


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    plateau_decay: float = 0.1
    plateau_patience: int = 3

    def __post_init__(self):
        if self.kind != "adam":
            raise InvalidConfig(f"unsupported optimizer {self.kind!r}")
        if self.lr <= 0:
            raise InvalidConfig("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidConfig("betas must lie in [0, 1)")
        if self.plateau_patience < 1:
            raise InvalidConfig("plateau_patience must be >= 1")


class Adam:
    def __init__(self, n: int, cfg: OptimizerConfig):
        self.cfg = cfg
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, weights: np.ndarray, grads: np.ndarray, lr: float) -> None:
        c = self.cfg
        self.t += 1
        self.m = c.beta1 * self.m + (1 - c.beta1) * grads
        self.v = c.beta2 * self.v + (1 - c.beta2) * grads * grads
        mhat = self.m / (1 - c.beta1**self.t)
        vhat = self.v / (1 - c.beta2**self.t)
        weights -= lr * mhat / (np.sqrt(vhat) + c.eps)


class PlateauScheduler:
    """Multiply lr by `decay` after `patience` epochs without improvement."""

    def __init__(self, lr: float, decay: float, patience: int, min_delta: float = 1e-4):
        self.lr = lr
        self.decay = decay
        self.patience = patience
        self.min_delta = min_delta
        self.best = -np.inf
        self.stale = 0

    def update(self, metric: float) -> float:
        if metric > self.best + self.min_delta:
            self.best = metric
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr *= self.decay
                self.stale = 0
        return self.lr


def split_dataset(samples: list, seed: int, fractions=(0.7, 0.1, 0.2)):
    """Disjoint, exhaustive train/val/test split, stable under the seed."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidConfig(f"split fractions must sum to 1, got {fractions}")
    idx = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(round(len(samples) * fractions[0]))
    n_val = int(round(len(samples) * fractions[1]))
    train = [samples[i] for i in idx[:n_train]]
    val = [samples[i] for i in idx[n_train : n_train + n_val]]
    test = [samples[i] for i in idx[n_train + n_val :]]
    return train, val, test


def bce_from_logits(logits: np.ndarray, targets: np.ndarray) -> float:
    """Numerically stable mean binary cross-entropy; targets may be smoothed."""
    z = logits
    t = targets
    return float(np.mean(np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))))


def _check_finite(loss: float, weights: np.ndarray, context: str):
    if not np.isfinite(loss):
        raise Divergence(f"{context}: loss became non-finite")
    if not np.all(np.isfinite(weights)):
        raise Divergence(f"{context}: weights became non-finite")


def _sample_tensor(sample: SyntheticSample, spec: PreprocessSpec, policy, rng) -> np.ndarray:
    img = sample.image
    if policy is not None and not policy.is_identity:
        img = augment(img, policy, rng)
    return preprocess_image(img, spec)


def _raw_plane_batch(samples, size: int) -> np.ndarray:
    spec = PreprocessSpec(target_size=size, mean=0.0, std=1.0)
    return np.stack([preprocess_image(s.image, spec) for s in samples])


def predict_probs_batch(graph: GraphSpec, weights: np.ndarray, xb: np.ndarray, output: str = "probs") -> np.ndarray:
    return engine.forward_batch(graph, weights, xb)[output]


def _mean_val_auc(graph, weights, xv, yv) -> float:
    probs = predict_probs_batch(graph, weights, xv)
    aucs = []
    for c in range(yv.shape[1]):
        if yv[:, c].min() != yv[:, c].max():
            aucs.append(auc_scores(probs[:, c], yv[:, c]))
    return float(np.mean(aucs)) if aucs else 0.5


def train_classifier(
    dataset: list[SyntheticSample],
    cfg: ClassifierConfig,
    opt: OptimizerConfig | None = None,
    policy: AugmentationPolicy | None = None,
    epochs: int = 10,
    batch_size: int = 16,
    seed: int = 0,
    preprocess_spec: PreprocessSpec | None = None,
):
    """Multi-label training with per-class binary cross-entropy.

    Returns (graph, weights, history); history rows carry epoch, loss,
    val_auc, and the lr in force, with plateau-triggered lr decay.
    """
    if not dataset:
        raise InvalidConfig("dataset is empty")
    if len({len(s.labels) for s in dataset}) != 1 or len(dataset[0].labels) != cfg.num_classes:
        raise InvalidConfig("sample labels must match cfg.num_classes")
    opt = opt or OptimizerConfig()
    spec = preprocess_spec or PreprocessSpec(target_size=cfg.input_size, mean=0.5, std=0.5)
    rng = np.random.default_rng(seed)
    train, val, _test = split_dataset(dataset, seed)
    if not train or not val:
        raise InvalidConfig(f"dataset of {len(dataset)} samples is too small to split")

    graph = build_classifier(cfg)
    weights = init_params(graph, rng)
    adam = Adam(weights.size, opt)
    sched = PlateauScheduler(opt.lr, opt.plateau_decay, opt.plateau_patience)
    xv = np.stack([_sample_tensor(s, spec, None, rng) for s in val])
    yv = np.asarray([s.labels for s in val], dtype=np.float64)

    history = []
    lr = opt.lr
    for epoch in range(epochs):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(train), batch_size):
            batch = [train[i] for i in order[start : start + batch_size]]
            xb = np.stack([_sample_tensor(s, spec, policy, rng) for s in batch])
            tb = np.asarray([s.labels for s in batch], dtype=np.float64)
            acts, caches = engine.run_forward(graph, weights, xb)
            logits = acts["logits"]
            probs = acts["probs"]
            loss = bce_from_logits(logits, tb)
            seed_grad = (probs - tb) / probs.size
            _, gw = engine.backward(graph, weights, acts, caches, {"logits": seed_grad})
            adam.step(weights, gw, lr)
            losses.append(loss)
            _check_finite(loss, weights, "train_classifier")
        val_auc = _mean_val_auc(graph, weights, xv, yv)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "val_auc": val_auc, "lr": lr})
        lr = sched.update(val_auc)
    return graph, weights, history


def train_autoencoder_l2(
    dataset: list[SyntheticSample],
    cfg: AutoencoderConfig,
    opt: OptimizerConfig | None = None,
    epochs: int = 30,
    batch_size: int = 25,
    seed: int = 0,
):
    """Mean-squared reconstruction training of the composed autoencoder.

    Returns (composed graph, weights, history).
    """
    if not dataset:
        raise InvalidConfig("dataset is empty")
    opt = opt or OptimizerConfig()
    rng = np.random.default_rng(seed)
    enc_g, dec_g = build_autoencoder(cfg)
    graph = compose_autoencoder(enc_g, dec_g)
    weights = init_params(graph, rng)
    adam = Adam(weights.size, opt)
    x_all = _raw_plane_batch(dataset, cfg.input_size)

    history = []
    lr = opt.lr
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for start in range(0, len(dataset), batch_size):
            xb = x_all[order[start : start + batch_size]]
            acts, caches = engine.run_forward(graph, weights, xb)
            xhat = acts["reconstruction"]
            err = xhat - xb
            loss = float(np.mean(err * err))
            seed_grad = 2.0 * err / err.size
            _, gw = engine.backward(graph, weights, acts, caches, {"reconstruction": seed_grad})
            adam.step(weights, gw, lr)
            losses.append(loss)
            _check_finite(loss, weights, "train_autoencoder_l2")
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "lr": lr})
    return graph, weights, history


def smooth_positive_labels(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(*POSITIVE_LABEL_RANGE, size=n)


def smooth_negative_labels(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(*NEGATIVE_LABEL_RANGE, size=n)


def generator_halted(disc_accuracy: float, halt_threshold: float) -> bool:
    """The generator is doing too well when the discriminator can no longer
    tell pairs apart; skip its update to let the discriminator recover."""
    return disc_accuracy < halt_threshold


def train_adversarial(
    dataset: list[SyntheticSample],
    cfg: AutoencoderConfig,
    opt: OptimizerConfig | None = None,
    disc_cfg: DiscriminatorConfig | None = None,
    epochs: int = 5,
    batch_size: int = 20,
    halt_threshold: float = 0.3,
    recon_weight: float = 0.0,
    seed: int = 0,
):
    """Adversarial autoencoder training: the discriminator separates
    (image, encoder(image)) pairs from (decoder(noise), noise) pairs; the
    encoder/decoder try to flip it. Real/fake targets are smoothed and the
    generator update is skipped while the discriminator is losing.

    Returns (composed graph, weights, history).
    """
    if not dataset:
        raise InvalidConfig("dataset is empty")
    opt = opt or OptimizerConfig(lr=0.001, beta1=0.5, beta2=0.999)
    disc_cfg = disc_cfg or DiscriminatorConfig(input_size=cfg.input_size, latent_dim=cfg.latent_dim)
    if disc_cfg.input_size != cfg.input_size or disc_cfg.latent_dim != cfg.latent_dim:
        raise InvalidConfig("discriminator must accept this autoencoder's (image, latent) pairs")
    rng = np.random.default_rng(seed)
    enc_g, dec_g = build_autoencoder(cfg)
    disc_g = build_discriminator(disc_cfg)
    w_enc = init_params(enc_g, rng)
    w_dec = init_params(dec_g, rng)
    w_disc = init_params(disc_g, rng)
    adam_enc = Adam(w_enc.size, opt)
    adam_dec = Adam(w_dec.size, opt)
    adam_disc = Adam(w_disc.size, opt)
    x_all = _raw_plane_batch(dataset, cfg.input_size)
    n_pix = cfg.input_size * cfg.input_size

    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        d_losses, g_losses, d_accs = [], [], []
        skipped = 0
        for start in range(0, len(dataset), batch_size):
            xb = x_all[order[start : start + batch_size]]
            b = xb.shape[0]
            z_prior = rng.standard_normal((b, cfg.latent_dim))

            # discriminator step
            z_hat = engine.forward_batch(enc_g, w_enc, xb)["latent"]
            x_tilde = engine.forward_batch(dec_g, w_dec, z_prior)["reconstruction"]
            pairs = np.concatenate(
                [
                    np.concatenate([xb.reshape(b, -1), z_hat], axis=1),
                    np.concatenate([x_tilde.reshape(b, -1), z_prior], axis=1),
                ]
            )
            targets = np.concatenate([smooth_positive_labels(rng, b), smooth_negative_labels(rng, b)])
            acts, caches = engine.run_forward(disc_g, w_disc, pairs)
            logits = acts["logit"][:, 0]
            probs = acts["prob"][:, 0]
            d_loss = bce_from_logits(logits, targets)
            seed_grad = ((probs - targets) / logits.size)[:, None]
            _, gw = engine.backward(disc_g, w_disc, acts, caches, {"logit": seed_grad})
            adam_disc.step(w_disc, gw, opt.lr)
            _check_finite(d_loss, w_disc, "train_adversarial (disc)")
            hard = np.concatenate([np.ones(b), np.zeros(b)])
            d_acc = float(np.mean((probs > 0.5) == hard))
            d_losses.append(d_loss)
            d_accs.append(d_acc)

            if generator_halted(d_acc, halt_threshold):
                skipped += 1
                continue

            # generator step: encoder and decoder try to flip the verdict
            enc_acts, enc_caches = engine.run_forward(enc_g, w_enc, xb)
            dec_acts, dec_caches = engine.run_forward(dec_g, w_dec, z_prior)
            z_hat = enc_acts["latent"]
            x_tilde = dec_acts["reconstruction"]
            pairs = np.concatenate(
                [
                    np.concatenate([xb.reshape(b, -1), z_hat], axis=1),
                    np.concatenate([x_tilde.reshape(b, -1), z_prior], axis=1),
                ]
            )
            flipped = np.concatenate([np.zeros(b), np.ones(b)])
            acts, caches = engine.run_forward(disc_g, w_disc, pairs)
            logits = acts["logit"][:, 0]
            probs = acts["prob"][:, 0]
            g_loss = bce_from_logits(logits, flipped)
            seed_grad = ((probs - flipped) / logits.size)[:, None]
            ginput, _ = engine.backward(disc_g, w_disc, acts, caches, {"logit": seed_grad})
            g_latent = ginput[:b, n_pix:]
            g_image = ginput[b:, :n_pix].reshape(x_tilde.shape)

            if recon_weight > 0:
                rec_acts, rec_caches = engine.run_forward(dec_g, w_dec, z_hat)
                rec = rec_acts["reconstruction"]
                g_loss += recon_weight * float(np.mean((rec - xb) ** 2))
                rec_seed = recon_weight * 2.0 * (rec - xb) / rec.size
                rec_gin, rec_gw_dec = engine.backward(dec_g, w_dec, rec_acts, rec_caches, {"reconstruction": rec_seed})
                g_latent = g_latent + rec_gin
            _, gw_enc = engine.backward(enc_g, w_enc, enc_acts, enc_caches, {"latent": g_latent})
            _, gw_dec = engine.backward(dec_g, w_dec, dec_acts, dec_caches, {"reconstruction": g_image})
            if recon_weight > 0:
                gw_dec = gw_dec + rec_gw_dec
            adam_enc.step(w_enc, gw_enc, opt.lr)
            adam_dec.step(w_dec, gw_dec, opt.lr)
            _check_finite(g_loss, w_enc, "train_adversarial (gen)")
            g_losses.append(g_loss)

        history.append(
            {
                "epoch": epoch,
                "d_loss": float(np.mean(d_losses)),
                "g_loss": float(np.mean(g_losses)) if g_losses else None,
                "d_accuracy": float(np.mean(d_accs)),
                "generator_steps_skipped": skipped,
            }
        )
    graph = compose_autoencoder(enc_g, dec_g)
    weights = np.concatenate([w_enc, w_dec])
    assert weights.size == WeightLayout(graph).total
    return graph, weights, history


def latent_codes(graph: GraphSpec, weights: np.ndarray, samples: list[SyntheticSample], size: int) -> np.ndarray:
    """Latent vectors of a composed (or encoder-only) graph over samples."""
    xb = _raw_plane_batch(samples, size)
    return engine.forward_batch(graph, weights, xb)["latent"]


def encoder_decoder(graph: GraphSpec, weights: np.ndarray) -> tuple[GraphModel, GraphModel]:
    return split_autoencoder(graph, weights)
