"""Out-of-distribution scoring and the admit/reject gate.

An image is reconstructed by the autoencoder; four scores rank how far it
sits from the training distribution: Euclidean distance in latent space and
L1 / L2 / SSIM reconstruction comparisons. A threshold calibrated on
in-distribution scores turns a score into an admit/reject verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .builders import GraphModel
from .errors import EmptyScores, InvalidConfig, ShapeMismatch
from .preprocess import Image
from .ssim import SsimParams, ssim

METRIC_KINDS = ("latent_l2", "recon_l1", "recon_l2", "ssim")

# ssim is similarity (higher = more in-distribution); the rest are distances.
_HIGHER_IS_IN = {"latent_l2": False, "recon_l1": False, "recon_l2": False, "ssim": True}


def higher_is_in_distribution(kind: str) -> bool:
    if kind not in _HIGHER_IS_IN:
        raise InvalidConfig(f"unknown OOD metric {kind!r}, expected one of {METRIC_KINDS}")
    return _HIGHER_IS_IN[kind]


@dataclass
class ReconstructionResult:
    reconstruction: Image
    error_map: np.ndarray  # |x - xhat| per pixel, (H, W)
    scores: dict[str, float]


@dataclass
class OodVerdict:
    admitted: bool
    metric: str
    score: float
    threshold: float

    def to_dict(self) -> dict:
        return {
            "admitted": self.admitted,
            "metric": self.metric,
            "score": self.score,
            "threshold": self.threshold,
        }


def _image_plane(img) -> np.ndarray:
    arr = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ShapeMismatch("expected a grayscale image")
        arr = arr[:, :, 0]
    return arr


def encode_latent(encoder: GraphModel, img) -> np.ndarray:
    x = _image_plane(img)[None, :, :]
    return engine.forward(encoder.graph, encoder.weights, x)[encoder.graph.outputs[0]].reshape(-1)


def reconstruct(encoder: GraphModel, decoder: GraphModel, img, ssim_params: SsimParams | None = None) -> ReconstructionResult:
    """Encode, decode, and score one grayscale image at the AE input size."""
    x = _image_plane(img)
    if (1,) + x.shape != tuple(encoder.graph.input_shape):
        raise ShapeMismatch(f"image shape {x.shape} does not match AE input {encoder.graph.input_shape}")
    z = encode_latent(encoder, x)
    xhat = engine.forward(decoder.graph, decoder.weights, z)[decoder.graph.outputs[0]][0]
    err = np.abs(x - xhat)
    scores = {
        "latent_l2": float(np.sqrt(np.sum(z * z))),
        "recon_l1": float(err.mean()),
        "recon_l2": float((err * err).mean()),
        "ssim": ssim(x, xhat, ssim_params),
    }
    return ReconstructionResult(reconstruction=Image(np.clip(xhat, 0.0, 1.0)[:, :, None]), error_map=err, scores=scores)


def score_latent_distance(encoder: GraphModel, img, mean: np.ndarray | None = None) -> float:
    """Euclidean distance of the latent code from the prior mean (zero).

    Pass `mean` to measure from an empirical training mean instead.
    """
    z = encode_latent(encoder, img)
    if mean is not None:
        z = z - np.asarray(mean, dtype=np.float64).reshape(z.shape)
    return float(np.sqrt(np.sum(z * z)))


def calibrate_threshold(in_distribution_scores, kind: str, percentile: float = 95.0) -> float:
    """Score quantile of the training set, oriented by the metric's direction.

    For distance-like metrics the threshold is the given percentile (admit
    below); for similarity metrics it is the complementary percentile (admit
    above). Quantiles interpolate the inverse empirical CDF.
    """
    scores = np.asarray(in_distribution_scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("cannot calibrate a threshold from zero scores")
    if not 0.0 < percentile <= 100.0:
        raise InvalidConfig(f"percentile {percentile} outside (0, 100]")
    p = percentile if not higher_is_in_distribution(kind) else 100.0 - percentile
    return float(np.quantile(scores, p / 100.0, method="interpolated_inverted_cdf"))


def decide(score: float, threshold: float, kind: str) -> OodVerdict:
    """Admit when the score sits on the in-distribution side; ties admit."""
    if not (np.isfinite(score) and np.isfinite(threshold)):
        raise InvalidConfig("score and threshold must be finite")
    if higher_is_in_distribution(kind):
        admitted = score >= threshold
    else:
        admitted = score <= threshold
    return OodVerdict(admitted=bool(admitted), metric=kind, score=float(score), threshold=float(threshold))


def gate_image(encoder: GraphModel, decoder: GraphModel, img, kind: str, threshold: float):
    """One-stop gate: reconstruct, score, decide. Returns (verdict, result)."""
    higher_is_in_distribution(kind)  # validates the metric name
    result = reconstruct(encoder, decoder, img)
    return decide(result.scores[kind], threshold, kind), result
