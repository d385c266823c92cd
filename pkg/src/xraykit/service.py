"""Local HTTP service: predict / ood / explain over a loaded model bundle.

The service binds to localhost by default and never forwards image bytes
anywhere: requests are processed in memory against the immutable bundles and
nothing is persisted, so patient data stays on the user's machine. Loaded
bundles must pass their embedded fixture self-verification before any
endpoint goes live.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from . import engine
from .bundle import (
    ModelBundle,
    load_bundle_file,
    self_verify,
    verification_passes,
)
from .errors import (
    BadClassIndex,
    BundleLoadFailure,
    IncompatibleHead,
    InvalidConfig,
    MalformedImage,
    ShapeMismatch,
    UnsupportedFormat,
    XrayKitError,
)
from .explain import explanation_overlay
from .pipeline import predict_response, run_gate
from .pngio import encode_heatmap_png, encode_rgba_png
from .preprocess import decode_image

MIN_UPLOAD_BYTES = 1024 * 1024


@dataclass
class ServiceConfig:
    bundle_path: str | Path
    ood_bundle_path: str | Path | None = None
    host: str = "127.0.0.1"
    port: int = 8417
    max_upload_bytes: int = 16 * 1024 * 1024
    gate_enabled: bool = True

    def __post_init__(self):
        if self.max_upload_bytes < MIN_UPLOAD_BYTES:
            raise InvalidConfig("max_upload_bytes must be at least 1 MiB")


def _load_verified(path) -> ModelBundle:
    try:
        bundle = load_bundle_file(path)
    except OSError as exc:
        raise BundleLoadFailure(f"cannot read bundle {path}: {exc}") from exc
    if bundle.verification:
        report = self_verify(bundle)
        if not verification_passes(report):
            raise BundleLoadFailure(
                f"bundle {path} failed fixture self-verification: max diff {report.max_abs_diff:.3g}"
            )
    return bundle


async def _read_image_bytes(request: Request, max_bytes: int) -> bytes:
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        upload = None
        for key in ("file", "image"):
            if key in form:
                upload = form[key]
                break
        if upload is None:
            for value in form.values():
                if hasattr(value, "read"):
                    upload = value
                    break
        if upload is None or not hasattr(upload, "read"):
            raise MalformedImage("multipart body carries no file field")
        data = await upload.read()
    else:
        data = await request.body()
    if not data:
        raise MalformedImage("empty request body")
    if len(data) > max_bytes:
        raise UnsupportedFormat(f"upload of {len(data)} bytes exceeds the {max_bytes}-byte limit")
    return data


def create_app(config: ServiceConfig) -> FastAPI:
    clf = _load_verified(config.bundle_path)
    ood_bundle = None
    if config.ood_bundle_path is not None:
        ood_bundle = _load_verified(config.ood_bundle_path)
        if ood_bundle.ood_metric is None:
            raise BundleLoadFailure("OOD bundle carries no calibrated gate threshold")
    if config.gate_enabled and ood_bundle is None:
        raise BundleLoadFailure("gate is enabled but no OOD bundle was given (pass one or disable the gate)")

    app = FastAPI(title="xraykit", docs_url=None, redoc_url=None)
    # the browser front end runs on another localhost port; images still
    # never leave the machine
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"^https?://(localhost|127\.0\.0\.1)(:\d+)?$",
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    @app.exception_handler(XrayKitError)
    async def _xraykit_errors(_request, exc: XrayKitError):
        status = 400
        if isinstance(exc, UnsupportedFormat) and "exceeds" in str(exc):
            status = 413
        elif isinstance(exc, (BadClassIndex, IncompatibleHead, InvalidConfig, ShapeMismatch)):
            status = 422
        return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "format_version": clf.format_version,
            "class_names": clf.class_names,
            "input_size": clf.input_size,
            "ood_gate": bool(config.gate_enabled and ood_bundle is not None),
            "ood_metric": None if ood_bundle is None else ood_bundle.ood_metric,
        }

    @app.get("/model/info")
    def model_info():
        return {
            "format_version": clf.format_version,
            "class_names": clf.class_names,
            "operating_points": clf.operating_points,
            "preprocess": clf.preprocess.to_dict(),
            "layer_count": len(clf.graph.layers),
            "weight_count": int(clf.weights.size),
            "outputs": clf.graph.outputs,
            "ood": None
            if ood_bundle is None
            else {"metric": ood_bundle.ood_metric, "threshold": ood_bundle.ood_threshold},
        }

    @app.post("/predict")
    async def predict(request: Request):
        data = await _read_image_bytes(request, config.max_upload_bytes)
        image = decode_image(data)
        return predict_response(clf, image, ood_bundle, config.gate_enabled)

    @app.post("/ood")
    async def ood_scores(request: Request):
        if ood_bundle is None:
            raise InvalidConfig("service is running without an OOD bundle")
        data = await _read_image_bytes(request, config.max_upload_bytes)
        image = decode_image(data)
        verdict, recon = run_gate(ood_bundle, image)
        return {
            "verdict": verdict.to_dict(),
            "scores": recon.scores,
            "error_map_png_base64": base64.b64encode(encode_heatmap_png(recon.error_map)).decode("ascii"),
        }

    @app.post("/explain")
    async def explain(
        request: Request,
        class_param: str = Query("all", alias="class"),
        method: str = Query("saliency"),
        format: str = Query("png"),
    ):
        data = await _read_image_bytes(request, config.max_upload_bytes)
        image = decode_image(data)
        class_index = engine.ALL if class_param.lower() == "all" else _parse_class(class_param, clf)
        overlay = explanation_overlay(clf, image, class_index, method)
        if format == "json":
            return {
                "class": class_param,
                "method": method,
                "shape": list(overlay.red.shape),
                "values": overlay.red.tolist(),
            }
        return Response(content=encode_rgba_png(overlay.to_rgba()), media_type="image/png")

    return app


def _parse_class(value: str, clf: ModelBundle) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise BadClassIndex(f"class must be an integer id or 'all', got {value!r}") from exc


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted (used by the CLI)."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
