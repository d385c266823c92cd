"""Portable model bundle: graph + weights + metadata, with round-trip verification.

Container layout is a ZIP holding `manifest.json` (canonical, key-sorted
UTF-8 JSON) and `weights.bin` (little-endian float32, no header). Weights run
in float64 in memory; float32 only exists at this boundary, which is what
makes the 1e-5 prediction check a real quantization test. Serialization is
canonical: save(load(save(b))) is byte-identical.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import BundleLoadFailure, CorruptManifest, VersionMismatch, WeightCountMismatch
from .graph import GraphSpec, WeightLayout
from .preprocess import DiffReport, Image, PreprocessSpec, compare_pipelines, preprocess_image

FORMAT_VERSION = 1
VERIFY_TOLERANCE = 1e-5

# Seeds of the three phantom images embedded (by construction) in every
# trained bundle for round-trip prediction verification.
FIXTURE_SEEDS = (1101, 1102, 1103)

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelBundle:
    graph: GraphSpec
    weights: np.ndarray
    preprocess: PreprocessSpec
    class_names: list[str] = field(default_factory=list)
    operating_points: list[float] = field(default_factory=list)
    ood_metric: str | None = None
    ood_threshold: float | None = None
    verification: dict | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        layout = WeightLayout(self.graph)
        if self.weights.shape[0] != layout.total:
            raise WeightCountMismatch(f"graph declares {layout.total} weights, got {self.weights.shape[0]}")
        if len(self.operating_points) != len(self.class_names):
            raise CorruptManifest("operating_points must align with class_names")
        for p in self.operating_points:
            if not 0.0 < p < 1.0:
                raise CorruptManifest(f"operating point {p} outside (0, 1)")

    def prob_output(self) -> str:
        """Name of the activation holding per-class probabilities."""
        return "probs" if "probs" in self.graph.outputs else self.graph.outputs[-1]

    def logit_output(self) -> str:
        return "logits" if "logits" in self.graph.outputs else self.graph.outputs[0]

    @property
    def input_size(self) -> int:
        return self.preprocess.target_size

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def _manifest(bundle: ModelBundle) -> dict:
    return {
        "format_version": bundle.format_version,
        "graph": bundle.graph.to_dict(),
        "class_names": list(bundle.class_names),
        "operating_points": [float(p) for p in bundle.operating_points],
        "preprocess": bundle.preprocess.to_dict(),
        "ood": (
            None
            if bundle.ood_metric is None
            else {"metric": bundle.ood_metric, "threshold": float(bundle.ood_threshold)}
        ),
        "verification": bundle.verification,
        "weight_count": int(bundle.weights.shape[0]),
    }


def save_bundle(bundle: ModelBundle) -> bytes:
    """Serialize to canonical ZIP bytes (fixed timestamps, stored entries)."""
    manifest = json.dumps(_manifest(bundle), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    weights32 = bundle.weights.astype("<f4").tobytes()
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, data in (("manifest.json", manifest.encode("utf-8")), ("weights.bin", weights32)):
            info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)
    return buf.getvalue()


def load_bundle(data: bytes) -> ModelBundle:
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise CorruptManifest(f"not a bundle container: {exc}") from exc
    with zf:
        names = set(zf.namelist())
        if "manifest.json" not in names or "weights.bin" not in names:
            raise CorruptManifest(f"bundle must contain manifest.json and weights.bin, found {sorted(names)}")
        try:
            manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptManifest(f"manifest.json unreadable: {exc}") from exc
        blob = zf.read("weights.bin")

    if not isinstance(manifest, dict):
        raise CorruptManifest("manifest.json must be a JSON object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported bundle format_version {version!r}, expected {FORMAT_VERSION}")
    try:
        graph = GraphSpec.from_dict(manifest["graph"])
        preprocess = PreprocessSpec.from_dict(manifest["preprocess"])
        class_names = [str(x) for x in manifest["class_names"]]
        operating_points = [float(x) for x in manifest["operating_points"]]
        ood = manifest.get("ood")
        verification = manifest.get("verification")
        declared = int(manifest["weight_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptManifest(f"manifest missing or malformed field: {exc}") from exc

    if len(blob) != 4 * declared:
        raise WeightCountMismatch(f"weights.bin holds {len(blob) // 4} floats, manifest declares {declared}")
    layout = WeightLayout(graph)
    if declared != layout.total:
        raise WeightCountMismatch(f"manifest declares {declared} weights, parameter slots require {layout.total}")
    weights = np.frombuffer(blob, dtype="<f4").astype(np.float64)

    return ModelBundle(
        graph=graph,
        weights=weights,
        preprocess=preprocess,
        class_names=class_names,
        operating_points=operating_points,
        ood_metric=None if ood is None else str(ood["metric"]),
        ood_threshold=None if ood is None else float(ood["threshold"]),
        verification=verification,
        format_version=version,
    )


def save_bundle_file(bundle: ModelBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_bundle(bundle))


def load_bundle_file(path) -> ModelBundle:
    with open(path, "rb") as fh:
        return load_bundle(fh.read())


def predict_probs(bundle: ModelBundle, image: Image, output_name: str | None = None) -> np.ndarray:
    """Per-class probabilities for one raw image (full preprocessing applied).

    `output_name` selects another named activation (e.g. the latent vector of
    an autoencoder bundle)."""
    x = preprocess_image(image, bundle.preprocess)
    name = output_name or bundle.prob_output()
    return engine.forward(bundle.graph, bundle.weights, x)[name].reshape(-1)


def verify_bundle(bundle: ModelBundle, reference_predictions, images: list[Image], output_name: str | None = None) -> DiffReport:
    """Compare the bundle's predictions on `images` against reference predictions
    produced by the in-memory (pre-serialization) model; passes at 1e-5."""
    preds = np.stack([predict_probs(bundle, img, output_name) for img in images])
    return compare_pipelines(np.asarray(reference_predictions, dtype=np.float64), preds)


def verification_passes(report: DiffReport) -> bool:
    return report.max_abs_diff <= VERIFY_TOLERANCE


def fixture_images(seeds=FIXTURE_SEEDS, size: int = 96) -> list[Image]:
    """The embedded verification fixtures: phantoms regenerated from fixed seeds."""
    from .synthetic import gen_phantom

    return [gen_phantom(seed, [bool(seed % 2), False], size=size).image for seed in seeds]


def attach_verification(bundle: ModelBundle, output_name: str | None = None) -> ModelBundle:
    """Record the in-memory model's fixture predictions inside the manifest.

    Must run before save_bundle so the stored references come from the
    float64 weights, making the post-load check a true quantization test.
    """
    images = fixture_images()
    name = output_name or bundle.prob_output()
    preds = [predict_probs(bundle, img, name).tolist() for img in images]
    bundle.verification = {
        "fixture_seeds": list(FIXTURE_SEEDS),
        "output": name,
        "reference_predictions": preds,
    }
    return bundle


def self_verify(bundle: ModelBundle) -> DiffReport:
    """Re-run the embedded fixtures against the stored reference predictions."""
    if not bundle.verification:
        raise BundleLoadFailure("bundle carries no verification block")
    seeds = bundle.verification["fixture_seeds"]
    images = fixture_images(seeds)
    name = bundle.verification.get("output")
    return verify_bundle(bundle, bundle.verification["reference_predictions"], images, name)
