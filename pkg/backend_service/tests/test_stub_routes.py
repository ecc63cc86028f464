"""All six routes in stub mode: shapes, values, and error envelopes."""
import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from backend_service import BackendConfig, build_app
from backend_service.protocol import decode_image, decode_mask, encode_image, encode_mask


@pytest.fixture(scope="module")
def client():
    return TestClient(build_app(BackendConfig(stub=True, device="cpu")), raise_server_exceptions=False)


def probe_image(w=20, h=12):
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    arr[:, : w // 2] = (200, 30, 30)
    return arr


def b64_image(arr):
    return encode_image(arr)


def b64_mask(bits):
    return encode_mask(bits)


def test_ground_segment_returns_canvas_sized_mask(client):
    arr = probe_image()
    resp = client.post("/v1/ground_segment", json={"image_png_b64": b64_image(arr), "query": "x"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["found"] is True
    mask = decode_mask(body["mask_png_b64"])
    assert mask.shape == arr.shape[:2]
    assert mask.any()


def test_tags(client):
    resp = client.post("/v1/tags", json={"image_png_b64": b64_image(probe_image())})
    assert resp.status_code == 200
    assert resp.json() == {"tags": ["stub"]}


def test_detect_segments(client):
    arr = probe_image()
    resp = client.post(
        "/v1/detect_segments", json={"image_png_b64": b64_image(arr), "tags": ["stub"]}
    )
    assert resp.status_code == 200
    segments = resp.json()["segments"]
    assert len(segments) == 1
    assert segments[0]["label"] == "stub"
    assert decode_mask(segments[0]["mask_png_b64"]).shape == arr.shape[:2]


def test_occlusion_order(client):
    arr = probe_image()
    m = np.zeros(arr.shape[:2], dtype=bool)
    m[2:6, 2:6] = True
    resp = client.post(
        "/v1/occlusion_order",
        json={
            "image_png_b64": b64_image(arr),
            "target_mask_png_b64": b64_mask(m),
            "candidate_mask_png_b64": b64_mask(~m),
        },
    )
    assert resp.status_code == 200
    assert resp.json() == {"occludes_target": False}


def test_score_is_always_half(client):
    resp = client.post(
        "/v1/score", json={"image_png_b64": b64_image(probe_image()), "text": "whatever"}
    )
    assert resp.status_code == 200
    assert resp.json() == {"score": 0.5}


def test_inpaint_preserves_outside_mask(client):
    arr = probe_image()
    mask = np.zeros(arr.shape[:2], dtype=bool)
    mask[3:9, 4:16] = True
    resp = client.post(
        "/v1/inpaint",
        json={"image_png_b64": b64_image(arr), "mask_png_b64": b64_mask(mask), "prompt": "p", "seed": 5},
    )
    assert resp.status_code == 200
    out = decode_image(resp.json()["image_png_b64"])
    assert np.array_equal(out[~mask], arr[~mask])
    assert (out[mask] == (127, 127, 127)).all()


def test_malformed_json_is_400_with_error(client):
    resp = client.post(
        "/v1/score", content=b"{oops", headers={"content-type": "application/json"}
    )
    assert resp.status_code == 400
    assert isinstance(resp.json()["error"], str)


def test_missing_field_is_400_with_error(client):
    resp = client.post("/v1/score", json={"text": "no image"})
    assert resp.status_code == 400
    assert "error" in resp.json()


def test_undecodable_payload_is_500_with_error(client):
    resp = client.post(
        "/v1/tags", json={"image_png_b64": base64.b64encode(b"not a png").decode()}
    )
    assert resp.status_code == 500
    assert "error" in resp.json()


def test_codec_round_trip():
    rng = np.random.default_rng(3)
    arr = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
    assert np.array_equal(decode_image(encode_image(arr)), arr)
    bits = rng.random((9, 7)) < 0.5
    assert np.array_equal(decode_mask(encode_mask(bits)), bits)
    # PNG bytes stay lossless through PIL regardless of source encoder
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    assert np.array_equal(
        decode_image(base64.b64encode(buf.getvalue()).decode("ascii")), arr
    )
