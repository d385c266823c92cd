"""CLI command tests: artifacts on disk, exit codes, determinism."""

import json

import pytest
from PIL import Image as PILImage

from xraykit import bundle as bd
from xraykit.cli import main
from xraykit.pngio import encode_gray_png
from xraykit.synthetic import gen_phantom


def run(*argv) -> int:
    return main(list(argv))


def test_gen_data_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert run("gen-data", "--seed", "7", "--n", "200", "--out", str(a)) == 0
    assert run("gen-data", "--seed", "7", "--n", "200", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    manifest = json.loads(a.read_text())
    assert len(manifest["samples"]) == 200


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run("gen-data", "--seed", "1", "--n", "5", "--out", "x.json", "--frobnicate")
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_dataset_exits_2(tmp_path):
    assert run("train-clf", "--data", str(tmp_path / "nope.json"), "--out", str(tmp_path / "m.bundle")) == 2


def test_train_clf_and_ae_write_bundles(tmp_path):
    data = tmp_path / "d.json"
    assert run("gen-data", "--seed", "3", "--n", "30", "--classes", "2", "--size", "32", "--out", str(data)) == 0
    out = tmp_path / "clf.bundle"
    hist = tmp_path / "hist.jsonl"
    code = run(
        "train-clf", "--data", str(data), "--out", str(out), "--epochs", "2",
        "--stem-channels", "4", "--growth", "4", "--blocks", "1,1", "--history", str(hist),
    )
    assert code == 0
    b = bd.load_bundle_file(out)
    assert b.num_classes == 2 and b.verification is not None
    rows = [json.loads(line) for line in hist.read_text().splitlines()]
    assert len(rows) == 2 and {"epoch", "loss", "val_auc", "lr"} <= set(rows[0])

    data64 = tmp_path / "d64.json"
    assert run("gen-data", "--seed", "4", "--n", "12", "--size", "64", "--out", str(data64)) == 0
    ae_out = tmp_path / "ae.bundle"
    code = run("train-ae", "--data", str(data64), "--out", str(ae_out), "--epochs", "1", "--latent", "8")
    assert code == 0
    ae = bd.load_bundle_file(ae_out)
    assert ae.ood_metric == "ssim" and ae.ood_threshold is not None


def test_train_ali_writes_bundle(tmp_path):
    data = tmp_path / "d.json"
    assert run("gen-data", "--seed", "5", "--n", "12", "--size", "32", "--out", str(data)) == 0
    out = tmp_path / "ali.bundle"
    code = run(
        "train-ali", "--data", str(data), "--out", str(out),
        "--epochs", "1", "--latent", "8", "--input-size", "32", "--batch-size", "6",
    )
    assert code == 0
    assert bd.load_bundle_file(out).ood_metric == "ssim"


def test_verify_self_pass_and_corrupted_fail(tmp_path, bundle_paths):
    assert run("verify", "--bundle", str(bundle_paths["clf"])) == 0

    broken = bd.load_bundle_file(bundle_paths["clf"])
    broken.weights = broken.weights + 0.05
    path = tmp_path / "broken.bundle"
    bd.save_bundle_file(broken, path)
    assert run("verify", "--bundle", str(path)) == 1


def test_verify_against_image_directory(tmp_path, bundle_paths):
    clf = bd.load_bundle_file(bundle_paths["clf"])
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    reference = []
    for i, seed in enumerate((900, 901, 902)):
        img = gen_phantom(seed, [bool(i % 2), False], size=96).image
        (fixtures / f"img_{i}.png").write_bytes(encode_gray_png(img))
        decoded = __import__("xraykit.preprocess", fromlist=["decode_image"]).decode_image(
            (fixtures / f"img_{i}.png").read_bytes()
        )
        reference.append(bd.predict_probs(clf, decoded).tolist())
    (fixtures / "reference_predictions.json").write_text(json.dumps(reference))
    assert run("verify", "--bundle", str(bundle_paths["clf"]), "--images", str(fixtures)) == 0


def test_predict_gated_and_ungated(tmp_path, bundle_paths, capsys):
    img_path = tmp_path / "p.png"
    img_path.write_bytes(encode_gray_png(gen_phantom(3001, [True, False], size=96).image))
    code = run(
        "predict", "--bundle", str(bundle_paths["clf"]), "--ood-bundle", str(bundle_paths["ae"]),
        "--image", str(img_path),
    )
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["ood"]["admitted"] is True
    assert len(body["predictions"]) == 2

    out = tmp_path / "resp.json"
    code = run("predict", "--bundle", str(bundle_paths["clf"]), "--image", str(img_path),
               "--no-gate", "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text())["ood"] is None


def test_explain_writes_png(tmp_path, bundle_paths):
    img_path = tmp_path / "p.png"
    img_path.write_bytes(encode_gray_png(gen_phantom(3002, [True, False], size=96).image))
    out = tmp_path / "overlay.png"
    code = run("explain", "--bundle", str(bundle_paths["clf"]), "--image", str(img_path),
               "--class", "0", "--method", "cam", "--out", str(out))
    assert code == 0
    img = PILImage.open(out)
    assert img.mode == "RGBA" and img.size == (32, 32)


def test_eval_report(tmp_path, bundle_paths):
    data = tmp_path / "eval.json"
    assert run("gen-data", "--seed", "88", "--n", "60", "--size", "32", "--out", str(data)) == 0
    out = tmp_path / "report.json"
    code = run("eval", "--bundle", str(bundle_paths["clf"]), "--data", str(data), "--out", str(out))
    assert code == 0
    report = json.loads(out.read_text())
    assert report["n_samples"] == 60
    for name, est in report["per_class_auc"].items():
        assert est is None or (est["n_splits"] == 10 and 0.0 <= est["mean"] <= 1.0)


def test_ood_eval_report(tmp_path, bundle_paths):
    data = tmp_path / "in.json"
    assert run("gen-data", "--seed", "89", "--n", "25", "--size", "64", "--out", str(data)) == 0
    out = tmp_path / "ood.json"
    code = run("ood-eval", "--bundle", str(bundle_paths["ae"]), "--data", str(data),
               "--families", "noise,blank", "--n-ood", "25", "--out", str(out))
    assert code == 0
    report = json.loads(out.read_text())
    assert set(report["separation_auc"]) == {"noise", "blank"}
    assert report["separation_auc"]["noise"]["recon_l2"] > 0.9


def test_retention_report(tmp_path, bundle_paths):
    data = tmp_path / "r.json"
    assert run("gen-data", "--seed", "90", "--n", "80", "--size", "64", "--out", str(data)) == 0
    out = tmp_path / "retention.json"
    code = run("retention", "--bundle", str(bundle_paths["clf"]), "--ood-bundle", str(bundle_paths["ae"]),
               "--data", str(data), "--out", str(out))
    assert code == 0
    report = json.loads(out.read_text())
    fracs = [p["retained_fraction"] for p in report["points"]]
    assert fracs and fracs[0] == 1.0
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))


def test_aug_matrix_smoke(tmp_path):
    data = tmp_path / "am.json"
    assert run("gen-data", "--seed", "91", "--n", "40", "--size", "16", "--out", str(data)) == 0
    out = tmp_path / "matrix.json"
    code = run("aug-matrix", "--data", str(data), "--out", str(out), "--levels", "0,1",
               "--epochs", "2", "--input-size", "16", "--stem-channels", "4",
               "--growth", "4", "--blocks", "1,1")
    assert code == 0
    matrix = json.loads(out.read_text())
    assert matrix["rows"] == ["train_level_0", "train_level_1"]
    assert len(matrix["auc"]) == 2 and len(matrix["auc"][0]) == 2


def test_env_var_bundle_default(tmp_path, bundle_paths, monkeypatch, capsys):
    monkeypatch.setenv("XRAY_BUNDLE", str(bundle_paths["clf"]))
    assert run("verify") == 0
    monkeypatch.delenv("XRAY_BUNDLE")
    assert run("verify") == 2  # no bundle given anywhere
