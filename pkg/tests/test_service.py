import base64
import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from textpose.checkpoint import file_sha256
from textpose.pipeline import load_bundle
from textpose.service import create_app


@pytest.fixture(scope="module")
def bundle(tiny_artifacts):
    return load_bundle(tiny_artifacts["stage1"], tiny_artifacts["stage2"],
                       tiny_artifacts["basics"], tiny_artifacts["vocab"])


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle, max_concurrency=4))


def encode_reference(width, height, seed=0):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class TestSynthesizeEndpoint:
    def test_valid_request(self, client, bundle):
        cfg = bundle.config
        resp = client.post("/v1/synthesize", json={
            "image": encode_reference(cfg.width, cfg.height),
            "caption": "a man in a red shirt",
        })
        assert resp.status_code == 200
        body = resp.json()
        png = base64.b64decode(body["image"])
        img = Image.open(io.BytesIO(png))
        assert img.size == (cfg.width, cfg.height)
        assert len(body["pose"]) == cfg.num_joints
        assert all(len(j) == 3 for j in body["pose"])
        assert 0 <= body["orientation"] < cfg.num_basic_poses
        assert body["latency_ms"] >= 0

    def test_empty_caption_400(self, client, bundle):
        resp = client.post("/v1/synthesize", json={
            "image": encode_reference(bundle.config.width, bundle.config.height),
            "caption": "   ",
        })
        assert resp.status_code == 400
        assert resp.json()["error"]["field"] == "caption"

    def test_undecodable_image_400(self, client):
        resp = client.post("/v1/synthesize", json={
            "image": base64.b64encode(b"junk").decode("ascii"),
            "caption": "a man",
        })
        assert resp.status_code == 400
        assert resp.json()["error"]["field"] == "image"

    def test_fully_oov_caption_422(self, client, bundle):
        resp = client.post("/v1/synthesize", json={
            "image": encode_reference(bundle.config.width, bundle.config.height),
            "caption": "zzzz qqqq wwww",
        })
        assert resp.status_code == 422
        assert resp.json()["error"]["field"] == "caption"

    def test_identical_requests_byte_identical_images(self, client, bundle):
        payload = {
            "image": encode_reference(bundle.config.width, bundle.config.height, seed=7),
            "caption": "a woman in a blue shirt",
        }
        a = client.post("/v1/synthesize", json=payload).json()
        b = client.post("/v1/synthesize", json=payload).json()
        assert a["image"] == b["image"]
        assert a["pose"] == b["pose"]
        assert a["orientation"] == b["orientation"]

    def test_return_pose_option(self, client, bundle):
        resp = client.post("/v1/synthesize", json={
            "image": encode_reference(bundle.config.width, bundle.config.height),
            "caption": "a man in a red shirt",
            "options": {"return_pose": False},
        })
        assert resp.status_code == 200
        assert resp.json()["pose"] is None

    def test_concurrency_gate_429(self, bundle):
        gated = TestClient(create_app(bundle, max_concurrency=0))
        resp = gated.post("/v1/synthesize", json={
            "image": encode_reference(bundle.config.width, bundle.config.height),
            "caption": "a man in a red shirt",
        })
        assert resp.status_code == 429


class TestBasicPosesEndpoint:
    def test_round_trips_through_serializer(self, client, bundle):
        resp = client.get("/v1/basic-poses")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["version"] == 1
        assert doc["K"] == bundle.config.num_basic_poses
        assert len(doc["poses"]) == doc["K"]
        assert doc["frame"] == [bundle.config.height, bundle.config.width]
        from textpose.pose_prior import BasicPoseSet

        restored = BasicPoseSet.from_json(json.dumps(doc))
        assert restored.to_json() == bundle.basics.to_json()


class TestHealthEndpoint:
    def test_ok_with_model_version(self, client, bundle, tiny_artifacts):
        resp = client.get("/v1/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["model_version"] == file_sha256(tiny_artifacts["stage2"])

    def test_503_before_load(self):
        unloaded = TestClient(create_app(None))
        assert unloaded.get("/v1/health").status_code == 503
        assert unloaded.get("/v1/basic-poses").status_code == 503
        resp = unloaded.post("/v1/synthesize", json={"image": "aGk=", "caption": "hi"})
        assert resp.status_code == 503


class TestRequestLogging:
    def test_structured_json_log_per_request(self, client, bundle, caplog):
        import logging

        with caplog.at_level(logging.INFO, logger="textpose.service"):
            client.get("/v1/health")
        records = [r for r in caplog.records if r.name == "textpose.service"]
        assert records
        entry = json.loads(records[-1].message)
        assert entry["method"] == "GET"
        assert entry["path"] == "/v1/health"
        assert entry["status"] == 200
        assert entry["latency_ms"] >= 0
