"""HTTP service contract tests against trained toy bundles."""

import base64
import io

import pytest
from fastapi.testclient import TestClient
from PIL import Image as PILImage

from xraykit.errors import BundleLoadFailure, InvalidConfig
from xraykit.pngio import encode_gray_png
from xraykit.service import ServiceConfig, create_app
from xraykit.synthetic import gen_ood, gen_phantom


@pytest.fixture(scope="module")
def client(bundle_paths):
    cfg = ServiceConfig(bundle_path=bundle_paths["clf"], ood_bundle_path=bundle_paths["ae"])
    return TestClient(create_app(cfg))


@pytest.fixture(scope="module")
def ungated_client(bundle_paths):
    cfg = ServiceConfig(bundle_path=bundle_paths["clf"], gate_enabled=False)
    return TestClient(create_app(cfg))


def phantom_png(seed=3001):
    return encode_gray_png(gen_phantom(seed, [True, False], size=96).image)


def noise_png(seed=42):
    return encode_gray_png(gen_ood(seed, "noise", size=96))


def test_health_reflects_bundle_metadata(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["format_version"] == 1
    assert body["class_names"] == ["opacity_00", "opacity_01"]
    assert body["input_size"] == 32
    assert body["ood_gate"] is True
    assert body["ood_metric"] == "ssim"


def test_model_info(client):
    body = client.get("/model/info").json()
    assert body["weight_count"] > 0
    assert len(body["operating_points"]) == 2
    assert body["ood"]["metric"] == "ssim"
    assert body["preprocess"]["target_size"] == 32


def test_predict_phantom_admitted(client):
    r = client.post("/predict", content=phantom_png())
    assert r.status_code == 200
    body = r.json()
    assert body["ood"]["admitted"] is True
    assert len(body["predictions"]) == 2
    for p in body["predictions"]:
        assert 0.0 <= p["raw_probability"] <= 1.0
        assert 0.0 <= p["calibrated_probability"] <= 1.0
        assert 0.0 < p["operating_point"] < 1.0


def test_predict_multipart_upload(client):
    r = client.post("/predict", files={"file": ("x.png", phantom_png(), "image/png")})
    assert r.status_code == 200
    assert r.json()["predictions"] is not None


def test_predict_noise_rejected_without_probabilities(client):
    r = client.post("/predict", content=noise_png())
    assert r.status_code == 200
    body = r.json()
    assert body["ood"]["admitted"] is False
    assert body["predictions"] is None
    heat = base64.b64decode(body["ood"]["error_map_png_base64"])
    img = PILImage.open(io.BytesIO(heat))
    assert img.size == (64, 64)  # AE input resolution


def test_predict_deterministic_for_identical_bytes(client):
    payload = phantom_png(3005)
    a = client.post("/predict", content=payload).json()
    b = client.post("/predict", content=payload).json()
    assert a == b


def test_predict_without_gate(ungated_client):
    r = ungated_client.post("/predict", content=noise_png())
    assert r.status_code == 200
    body = r.json()
    assert body["ood"] is None
    assert len(body["predictions"]) == 2


def test_ood_endpoint_scores_and_heatmap(client):
    r = client.post("/ood", content=phantom_png())
    assert r.status_code == 200
    body = r.json()
    assert set(body["scores"]) == {"latent_l2", "recon_l1", "recon_l2", "ssim"}
    assert body["verdict"]["metric"] == "ssim"
    assert base64.b64decode(body["error_map_png_base64"])


def test_explain_png_overlay(client):
    r = client.post("/explain?class=0&method=saliency", content=phantom_png())
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    img = PILImage.open(io.BytesIO(r.content))
    assert img.mode == "RGBA" and img.size == (32, 32)


def test_explain_cam_and_all(client):
    r = client.post("/explain?class=1&method=cam", content=phantom_png())
    assert r.status_code == 200
    r = client.post("/explain?class=all&method=saliency", content=phantom_png())
    assert r.status_code == 200


def test_explain_json_format(client):
    r = client.post("/explain?class=0&method=saliency&format=json", content=phantom_png())
    assert r.status_code == 200
    body = r.json()
    assert body["shape"] == [32, 32]
    assert len(body["values"]) == 32


def test_explain_bad_class_and_method(client):
    assert client.post("/explain?class=9&method=saliency", content=phantom_png()).status_code == 422
    assert client.post("/explain?class=zero", content=phantom_png()).status_code == 422
    assert client.post("/explain?class=0&method=occlusion", content=phantom_png()).status_code == 422


def test_malformed_image_400(client):
    r = client.post("/predict", content=b"not an image at all")
    assert r.status_code == 400
    r = client.post("/predict", content=b"")
    assert r.status_code == 400


def test_oversized_upload_413(client):
    blob = b"\x89PNG\r\n\x1a\n" + b"\0" * (16 * 1024 * 1024)
    r = client.post("/predict", content=blob)
    assert r.status_code == 413


def test_gate_requires_ood_bundle(bundle_paths):
    with pytest.raises(BundleLoadFailure):
        create_app(ServiceConfig(bundle_path=bundle_paths["clf"], gate_enabled=True))


def test_upload_floor_validation(bundle_paths):
    with pytest.raises(InvalidConfig):
        ServiceConfig(bundle_path=bundle_paths["clf"], max_upload_bytes=1024)


def test_service_module_has_no_outbound_clients():
    import inspect

    import xraykit.service as svc

    src = inspect.getsource(svc)
    for name in ("requests.", "urllib.request", "httpx."):
        assert name not in src
