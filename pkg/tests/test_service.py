import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from pcdgen.annotations import parse_annotation
from pcdgen.service import build_app

FIXTURES = Path(__file__).parent.parent / "fixtures" / "annotations"

# 1x1 black PNG, enough to stand in for a real mask
PNG_BYTES = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108000000003a7e9b55"
    "0000000a49444154789c636000000002000148afa4710000000049454e44ae426082")


@pytest.fixture
def service(tmp_path):
    frame_dir = tmp_path / "frames"
    frame_dir.mkdir()
    for i in range(1, 41):
        (frame_dir / f"{i:06d}.png").write_bytes(PNG_BYTES + bytes([i]))
    out = tmp_path / "out" / "annotation.json"
    return TestClient(build_app(frame_dir, out)), out


def fixture_body(name):
    return json.loads((FIXTURES / name).read_text())["body"]


class TestFrames:
    def test_listing(self, service):
        client, _ = service
        r = client.get("/frames")
        assert r.status_code == 200
        assert r.json()["count"] == 40
        assert r.json()["files"][0] == "000001.png"
        assert r.json()["files"] == sorted(r.json()["files"])

    def test_frame_bytes(self, service):
        client, _ = service
        r = client.get("/frames/7")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content == PNG_BYTES + bytes([7])

    def test_out_of_range(self, service):
        client, _ = service
        assert client.get("/frames/41").status_code == 404
        assert client.get("/frames/0").status_code == 404

    def test_meta(self, service):
        client, _ = service
        r = client.get("/meta")
        assert r.json() == {"objects": 0, "horizon": 40}


class TestAnnotationEndpoint:
    def test_valid_roundtrip(self, service):
        client, out = service
        body = fixture_body("valid_bimanual_two_skills.json")
        r = client.post("/annotation", json=body)
        assert r.status_code == 200, r.text
        assert r.json()["ok"] and r.json()["segments"] == 4
        ann = parse_annotation(out, 3, 40)
        assert ann.horizon == 40 and ann.skill_count == 2

    def test_adjacent_skills_rejected(self, service):
        client, out = service
        body = fixture_body("error_adjacent_skills.json")
        r = client.post("/annotation", json=body)
        assert r.status_code == 400
        assert r.json()["error"] == "InterleaveError"
        assert not out.exists()

    def test_id_beyond_masks(self, service):
        client, _ = service
        body = fixture_body("valid_single_arm.json")
        body["annotations"][1]["target"] = [9]
        r = client.post("/annotation", json=body)
        assert r.status_code == 400
        assert r.json()["error"] == "RangeError"

    def test_not_json(self, service):
        client, _ = service
        r = client.post("/annotation", content=b"{oops",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400
        assert r.json()["error"] == "SchemaError"

    def test_trailing_motion_warns(self, service):
        client, _ = service
        body = fixture_body("valid_trailing_motion_trimmed.json")
        r = client.post("/annotation", json=body)
        assert r.status_code == 200
        assert any("trailing motion" in w for w in r.json()["warnings"])
        assert r.json()["horizon"] == 19

    def test_rewrite_allowed(self, service):
        client, out = service
        body = fixture_body("valid_bimanual_two_skills.json")
        assert client.post("/annotation", json=body).status_code == 200
        first = out.read_text()
        body["annotations"][1]["target"] = [1]
        assert client.post("/annotation", json=body).status_code == 200
        assert out.read_text() != first


class TestMasks:
    def test_store(self, service):
        client, out = service
        r = client.post("/masks/mask_1.png", content=PNG_BYTES)
        assert r.status_code == 200
        stored = out.parent / "masks" / "mask_1.png"
        assert stored.read_bytes() == PNG_BYTES

    def test_traversal_blocked(self, service):
        client, out = service
        r = client.post("/masks/..%2Fescape.png", content=PNG_BYTES)
        assert r.status_code in (400, 404)
        assert not (out.parent / "escape.png").exists()

    def test_non_png_rejected(self, service):
        client, _ = service
        assert client.post("/masks/mask_1.bmp", content=PNG_BYTES).status_code == 400

    def test_empty_rejected(self, service):
        client, _ = service
        assert client.post("/masks/mask_1.png", content=b"").status_code == 400
