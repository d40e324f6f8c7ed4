import json

import pytest
from fastapi.testclient import TestClient

from main import app
from storage.image_store import image_store


@pytest.fixture
def client():
    return TestClient(app)


def test_health(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_default_config_uses_json_field_names(client):
    response = client.get("/api/v1/config/defaults")
    assert response.status_code == 200
    body = response.json()
    assert "lambda" in body["solver"]
    assert body["solver"]["prox_l"]["kind"] == "identity"


def test_enhance_endpoint(client, tmp_path, dark_png):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"solver": {"stages": 2}}))
    response = client.post("/api/v1/enhance", json={
        "input_path": dark_png,
        "config_path": str(config_path),
        "alpha": 0.4,
        "out_dir": str(tmp_path / "out"),
    })
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["alpha"] == 0.4
    assert body["enhanced_path"].endswith("dark_enhanced.png")


def test_enhance_missing_input_is_404(client, tmp_path):
    response = client.post("/api/v1/enhance", json={"input_path": str(tmp_path / "nope.png"),
                                                    "out_dir": str(tmp_path)})
    assert response.status_code == 404
    assert "load: " in response.json()["detail"]


def test_enhance_rejects_alpha_out_of_range(client, dark_png):
    response = client.post("/api/v1/enhance", json={"input_path": dark_png, "alpha": 2.0})
    assert response.status_code == 422


def test_benchmark_endpoint(client, tmp_path, distinct_lightness_image):
    image_store.save_image(distinct_lightness_image, str(tmp_path / "img.png"))
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"entries": [{"id": "img", "low_path": "img.png", "high_path": "img.png"}]}))
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"solver": {"stages": 2, "gamma": 0.0},
                                       "adjustment_init": {"refl_gain": 0.0}}))

    response = client.post("/api/v1/benchmark", json={
        "manifest_path": str(manifest),
        "config_path": str(config_path),
        "out": str(tmp_path / "report.json"),
    })
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["success"] is True
    assert body["failed_entries"] == 0
    assert body["mean"]["psnr"] == 99.0


def test_benchmark_missing_manifest_is_404(client, tmp_path):
    response = client.post("/api/v1/benchmark", json={"manifest_path": str(tmp_path / "none.json")})
    assert response.status_code == 404


def test_benchmark_bad_config_is_400(client, tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text("[]")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"entries": []}))
    response = client.post("/api/v1/benchmark", json={"manifest_path": str(manifest),
                                                      "config_path": str(config_path)})
    assert response.status_code == 400
