import io

import pytest
import torch
from fastapi.testclient import TestClient

from conftest import small_model_config
from woundfuse.bodymap import BodyMapError, default_registry
from woundfuse.model import CheckpointError, build_model, save_checkpoint
from woundfuse.service import ENV_CHECKPOINT, create_app, predict_probabilities, serve
from woundfuse.synthetic import synthetic_image


@pytest.fixture(scope="module")
def plain_checkpoint(tmp_path_factory):
    torch.manual_seed(51)
    model = build_model(small_model_config(num_classes=2), ("D", "V"))
    return save_checkpoint(model, tmp_path_factory.mktemp("svc") / "plain.pt", model_id="plain")


@pytest.fixture(scope="module")
def located_checkpoint(tmp_path_factory):
    torch.manual_seed(52)
    cfg = small_model_config(num_classes=2, use_location=True)
    model = build_model(cfg, ("D", "V"), registry_size=len(default_registry()))
    return save_checkpoint(model, tmp_path_factory.mktemp("svc-loc") / "located.pt", model_id="located")


@pytest.fixture(scope="module")
def plain_client(plain_checkpoint):
    return TestClient(create_app(plain_checkpoint))


@pytest.fixture(scope="module")
def located_client(located_checkpoint):
    return TestClient(create_app(located_checkpoint))


def png_bytes(tag="D", seed=0):
    import numpy as np

    buf = io.BytesIO()
    synthetic_image(tag, size=40, rng=np.random.default_rng(seed)).save(buf, format="PNG")
    return buf.getvalue()


def upload(payload=None):
    if payload is None:
        payload = png_bytes()
    return {"image": ("wound.png", payload, "image/png")}


class TestHealth:
    def test_plain_model(self, plain_client):
        resp = plain_client.get("/api/v1/health")
        assert resp.status_code == 200
        assert resp.json() == {
            "status": "ok",
            "classes": ["D", "V"],
            "uses_location": False,
            "input_size": 48,
        }

    def test_location_model(self, located_client):
        assert located_client.get("/api/v1/health").json()["uses_location"] is True


class TestBodymap:
    def test_full_registry_listed_ascending(self, plain_client):
        regions = plain_client.get("/api/v1/bodymap").json()["regions"]
        assert len(regions) == len(default_registry())
        codes = [r["code"] for r in regions]
        assert codes == sorted(codes)
        assert set(regions[0]) == {"code", "name", "side", "view"}

    def test_named_region_present(self, plain_client):
        regions = plain_client.get("/api/v1/bodymap").json()["regions"]
        by_code = {r["code"]: r for r in regions}
        assert by_code[135]["name"] == "Right Fifth Toe Tip"
        assert by_code[135]["side"] == "right"


class TestPredict:
    def test_plain_model_happy_path(self, plain_client):
        resp = plain_client.post("/api/v1/predict", files=upload())
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"predicted_class", "probabilities", "model_id", "location"}
        assert body["model_id"] == "plain"
        assert body["location"] is None
        assert set(body["probabilities"]) == {"D", "V"}
        assert sum(body["probabilities"].values()) == pytest.approx(1.0, abs=1e-6)
        assert body["predicted_class"] == max(
            body["probabilities"], key=body["probabilities"].get
        )

    def test_location_model_happy_path(self, located_client):
        resp = located_client.post(
            "/api/v1/predict", files=upload(), data={"location_code": "135"}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["location"] == {"code": 135, "name": "Right Fifth Toe Tip"}
        assert body["model_id"] == "located"

    def test_repeat_requests_are_byte_identical(self, located_client):
        payload = png_bytes(seed=3)
        first = located_client.post(
            "/api/v1/predict", files=upload(payload), data={"location_code": "150"}
        )
        second = located_client.post(
            "/api/v1/predict", files=upload(payload), data={"location_code": "150"}
        )
        assert first.status_code == second.status_code == 200
        assert first.content == second.content

    def test_matches_offline_inference(self, located_checkpoint, located_client):
        from PIL import Image

        from woundfuse.model import load_checkpoint

        payload = png_bytes(tag="V", seed=7)
        resp = located_client.post(
            "/api/v1/predict", files=upload(payload), data={"location_code": "178"}
        )
        model, _ = load_checkpoint(located_checkpoint)
        offline = predict_probabilities(
            model, Image.open(io.BytesIO(payload)), registry=default_registry(), location_code=178
        )
        assert resp.json()["predicted_class"] == offline["predicted_class"]
        assert resp.json()["probabilities"] == offline["probabilities"]

    def test_accepted_model_id(self, plain_client):
        resp = plain_client.post(
            "/api/v1/predict", files=upload(), data={"model_id": "plain"}
        )
        assert resp.status_code == 200

    def test_unknown_model_id(self, plain_client):
        resp = plain_client.post(
            "/api/v1/predict", files=upload(), data={"model_id": "other"}
        )
        assert resp.status_code == 404
        assert "unknown model_id" in resp.json()["detail"]


class TestPredictErrors:
    def test_location_required(self, located_client):
        resp = located_client.post("/api/v1/predict", files=upload())
        assert resp.status_code == 400
        assert resp.json()["detail"] == "this model requires a location_code"

    def test_unknown_location_code(self, located_client):
        resp = located_client.post(
            "/api/v1/predict", files=upload(), data={"location_code": "9999"}
        )
        assert resp.status_code == 400
        assert resp.json()["detail"] == "unknown body-map code 9999"

    def test_non_integer_location_code(self, located_client):
        resp = located_client.post(
            "/api/v1/predict", files=upload(), data={"location_code": "heel"}
        )
        assert resp.status_code == 400
        assert "must be an integer" in resp.json()["detail"]

    def test_location_rejected_by_plain_model(self, plain_client):
        resp = plain_client.post(
            "/api/v1/predict", files=upload(), data={"location_code": "135"}
        )
        assert resp.status_code == 422
        assert "does not accept" in resp.json()["detail"]

    def test_blank_location_code_is_absent(self, plain_client):
        resp = plain_client.post(
            "/api/v1/predict", files=upload(), data={"location_code": "  "}
        )
        assert resp.status_code == 200

    def test_empty_upload(self, plain_client):
        resp = plain_client.post("/api/v1/predict", files=upload(b""))
        assert resp.status_code == 400
        assert resp.json()["detail"] == "empty image upload"

    def test_undecodable_image(self, plain_client):
        resp = plain_client.post("/api/v1/predict", files=upload(b"not a png"))
        assert resp.status_code == 400
        assert resp.json()["detail"].startswith("undecodable image")

    def test_missing_image_field(self, plain_client):
        resp = plain_client.post("/api/v1/predict", data={"location_code": "135"})
        assert resp.status_code == 422


class TestStartup:
    def test_env_var_overrides_argument(self, plain_checkpoint, located_checkpoint, monkeypatch):
        monkeypatch.setenv(ENV_CHECKPOINT, str(located_checkpoint))
        app = create_app(plain_checkpoint)
        client = TestClient(app)
        assert client.get("/api/v1/health").json()["uses_location"] is True

    def test_no_checkpoint_anywhere(self, monkeypatch):
        monkeypatch.delenv(ENV_CHECKPOINT, raising=False)
        with pytest.raises(ValueError, match=ENV_CHECKPOINT):
            create_app()

    def test_missing_checkpoint_file(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CHECKPOINT, raising=False)
        with pytest.raises(CheckpointError, match="not found"):
            create_app(tmp_path / "ghost.pt")

    def test_corrupt_checkpoint_file(self, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CHECKPOINT, raising=False)
        bad = tmp_path / "bad.pt"
        bad.write_bytes(b"scrambled")
        with pytest.raises(CheckpointError, match="could not read"):
            create_app(bad)

    def test_missing_registry_file(self, plain_checkpoint, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CHECKPOINT, raising=False)
        with pytest.raises(BodyMapError):
            create_app(plain_checkpoint, registry_path=tmp_path / "regions.csv")

    def test_serve_exits_nonzero_on_bad_checkpoint(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv(ENV_CHECKPOINT, raising=False)
        with pytest.raises(SystemExit) as excinfo:
            serve(tmp_path / "ghost.pt")
        assert excinfo.value.code == 1
        assert "service startup failed" in capsys.readouterr().err
