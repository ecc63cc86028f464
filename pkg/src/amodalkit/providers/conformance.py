"""Protocol conformance checks runnable against any backend URL.

Used by the engine's own mock server tests and by external backend
implementations to prove route names, field names, and error shapes match the
wire protocol exactly.  Returns a list of human-readable failures; an empty
list means the backend conforms.
"""
from __future__ import annotations

import numpy as np
import httpx

from ..imaging import Image
from ..masks import BinaryMask
from . import wire


def _probe_image() -> Image:
    buf = np.zeros((16, 16, 3), dtype=np.uint8)
    buf[4:12, 4:12] = (200, 40, 40)
    return Image(buf)


def _probe_mask(on: bool = True) -> BinaryMask:
    bits = np.zeros((16, 16), dtype=bool)
    if on:
        bits[2:9, 2:9] = True
    return BinaryMask(bits)


def check_protocol(base_url: str, timeout: float = 10.0) -> list[str]:
    failures: list[str] = []
    img_b64 = wire.encode_image(_probe_image())
    mask_b64 = wire.encode_mask(_probe_mask())
    other_mask_b64 = wire.encode_mask(
        BinaryMask(np.pad(np.ones((5, 5), bool), ((9, 2), (9, 2))))
    )

    with httpx.Client(base_url=base_url, timeout=timeout) as client:

        def post(route: str, payload: dict):
            try:
                return client.post(route, json=payload)
            except httpx.HTTPError as exc:
                failures.append(f"{route}: transport failure {exc}")
                return None

        def expect_fields(route: str, resp, fields: dict):
            """fields maps name -> type (or tuple of types)."""
            if resp is None:
                return None
            if resp.status_code != 200:
                failures.append(f"{route}: expected 200, got {resp.status_code}")
                return None
            try:
                body = resp.json()
            except Exception:
                failures.append(f"{route}: non-JSON 200 body")
                return None
            for name, types in fields.items():
                if name not in body:
                    failures.append(f"{route}: response missing field {name!r}")
                elif not isinstance(body[name], types):
                    failures.append(f"{route}: field {name!r} has type {type(body[name]).__name__}")
            return body

        body = expect_fields(
            "/v1/ground_segment",
            post("/v1/ground_segment", {"image_png_b64": img_b64, "query": "thing"}),
            {"found": bool},
        )
        if body and body["found"]:
            try:
                wire.decode_mask(body["mask_png_b64"])
            except Exception:
                failures.append("/v1/ground_segment: mask_png_b64 not a decodable PNG mask")

        body = expect_fields(
            "/v1/tags", post("/v1/tags", {"image_png_b64": img_b64}), {"tags": list}
        )
        if body and not all(isinstance(t, str) for t in body["tags"]):
            failures.append("/v1/tags: tags must be strings")

        body = expect_fields(
            "/v1/detect_segments",
            post("/v1/detect_segments", {"image_png_b64": img_b64, "tags": ["thing"]}),
            {"segments": list},
        )
        if body:
            for i, seg in enumerate(body["segments"]):
                if "label" not in seg or "mask_png_b64" not in seg:
                    failures.append(f"/v1/detect_segments: segment {i} missing label/mask_png_b64")
                    continue
                try:
                    wire.decode_mask(seg["mask_png_b64"])
                except Exception:
                    failures.append(f"/v1/detect_segments: segment {i} mask not decodable")

        expect_fields(
            "/v1/occlusion_order",
            post(
                "/v1/occlusion_order",
                {
                    "image_png_b64": img_b64,
                    "target_mask_png_b64": mask_b64,
                    "candidate_mask_png_b64": other_mask_b64,
                },
            ),
            {"occludes_target": bool},
        )

        expect_fields(
            "/v1/score",
            post("/v1/score", {"image_png_b64": img_b64, "text": "thing"}),
            {"score": (int, float)},
        )

        body = expect_fields(
            "/v1/inpaint",
            post(
                "/v1/inpaint",
                {"image_png_b64": img_b64, "mask_png_b64": mask_b64, "prompt": "thing", "seed": 1},
            ),
            {"image_png_b64": str},
        )
        if body:
            try:
                out = wire.decode_image(body["image_png_b64"])
                if out.shape != (16, 16):
                    failures.append("/v1/inpaint: returned image changed canvas size")
            except Exception:
                failures.append("/v1/inpaint: image_png_b64 not a decodable PNG")

        # error shape: malformed JSON must yield a non-2xx {error: string}
        try:
            resp = client.post(
                "/v1/score", content=b"{not json", headers={"content-type": "application/json"}
            )
            if resp.status_code < 400:
                failures.append("malformed JSON: expected a 4xx/5xx status")
            else:
                try:
                    if not isinstance(resp.json().get("error"), str):
                        failures.append("malformed JSON: error body missing 'error' string")
                except Exception:
                    failures.append("malformed JSON: non-JSON error body")
        except httpx.HTTPError as exc:
            failures.append(f"malformed JSON probe: transport failure {exc}")

        # error shape: missing required field
        resp = post("/v1/score", {"text": "no image"})
        if resp is not None:
            if resp.status_code < 400:
                failures.append("missing field: expected a 4xx status")
            else:
                try:
                    if not isinstance(resp.json().get("error"), str):
                        failures.append("missing field: error body missing 'error' string")
                except Exception:
                    failures.append("missing field: non-JSON error body")

    return failures
