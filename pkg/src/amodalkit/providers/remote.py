"""HTTP client implementation of the provider contract."""
from __future__ import annotations

import httpx

from ..errors import BackendUnavailable
from ..imaging import Image
from ..masks import BinaryMask
from . import wire
from .base import (
    OcclusionRelation,
    ProviderEndpoint,
    Providers,
    Score,
    Segment,
    TagSet,
    check_masks_nonempty,
    check_query,
)


class RemoteProviders(Providers):
    """Speaks the JSON/base64-PNG protocol against one base URL.

    Transport failures are retried per the endpoint settings; anything that
    still fails — including malformed responses — surfaces as
    BackendUnavailable, never as a crash inside the engine.
    """

    def __init__(self, endpoint: ProviderEndpoint, client: httpx.Client | None = None):
        self.endpoint = endpoint
        headers = {}
        if endpoint.auth_token:
            headers["Authorization"] = f"Bearer {endpoint.auth_token}"
        self._client = client or httpx.Client(
            base_url=endpoint.base_url, timeout=endpoint.timeout, headers=headers
        )

    def close(self):
        self._client.close()

    def _post(self, route: str, payload: dict) -> dict:
        url = f"{self.endpoint.base_url}{route}"
        last_exc = None
        for _ in range(self.endpoint.retries + 1):
            try:
                resp = self._client.post(route, json=payload)
            except httpx.HTTPError as exc:
                last_exc = exc
                continue
            if resp.status_code >= 300:
                detail = ""
                try:
                    detail = resp.json().get("error", "")
                except Exception:
                    detail = resp.text[:200]
                raise BackendUnavailable(
                    f"{url} returned {resp.status_code}: {detail}", endpoint=url
                )
            try:
                body = resp.json()
            except Exception:
                raise BackendUnavailable(
                    f"{url} returned a malformed body ({len(resp.content)} bytes)",
                    endpoint=url,
                ) from None
            if not isinstance(body, dict):
                raise BackendUnavailable(
                    f"{url} returned a non-object body ({len(resp.content)} bytes)",
                    endpoint=url,
                )
            return body
        raise BackendUnavailable(f"{url} unreachable: {last_exc}", endpoint=url)

    def _field(self, body: dict, route: str, key: str):
        if key not in body:
            raise BackendUnavailable(
                f"{self.endpoint.base_url}{route} response missing {key!r} "
                f"({len(str(body))} bytes)",
                endpoint=f"{self.endpoint.base_url}{route}",
            )
        return body[key]

    def _decode_mask(self, data, route: str) -> BinaryMask:
        try:
            return wire.decode_mask(data)
        except Exception:
            size = len(data) if isinstance(data, (str, bytes)) else 0
            raise BackendUnavailable(
                f"{self.endpoint.base_url}{route} sent an undecodable mask ({size} bytes)",
                endpoint=f"{self.endpoint.base_url}{route}",
            ) from None

    def ground_segment(self, img: Image, query: str):
        check_query(query)
        body = self._post(
            "/v1/ground_segment",
            {"image_png_b64": wire.encode_image(img), "query": query},
        )
        if not self._field(body, "/v1/ground_segment", "found"):
            return None
        return self._decode_mask(
            self._field(body, "/v1/ground_segment", "mask_png_b64"), "/v1/ground_segment"
        )

    def tag_scene(self, img: Image) -> TagSet:
        body = self._post("/v1/tags", {"image_png_b64": wire.encode_image(img)})
        return TagSet.from_iterable(self._field(body, "/v1/tags", "tags"))

    def detect_segments(self, img: Image, tags: TagSet) -> list[Segment]:
        body = self._post(
            "/v1/detect_segments",
            {"image_png_b64": wire.encode_image(img), "tags": list(tags)},
        )
        out = []
        for seg in self._field(body, "/v1/detect_segments", "segments"):
            out.append(
                Segment(
                    label=str(seg.get("label", "")),
                    mask=self._decode_mask(seg.get("mask_png_b64"), "/v1/detect_segments"),
                )
            )
        return out

    def occlusion_order(self, img: Image, target: BinaryMask, candidate: BinaryMask):
        check_masks_nonempty(("target", target), ("candidate", candidate))
        body = self._post(
            "/v1/occlusion_order",
            {
                "image_png_b64": wire.encode_image(img),
                "target_mask_png_b64": wire.encode_mask(target),
                "candidate_mask_png_b64": wire.encode_mask(candidate),
            },
        )
        return OcclusionRelation(
            occludes_target=bool(self._field(body, "/v1/occlusion_order", "occludes_target"))
        )

    def score_text_image(self, img: Image, text: str) -> Score:
        check_query(text)
        body = self._post(
            "/v1/score", {"image_png_b64": wire.encode_image(img), "text": text}
        )
        return Score(float(self._field(body, "/v1/score", "score")))

    def inpaint(self, img: Image, region: BinaryMask, prompt: str, seed: int = 0) -> Image:
        check_masks_nonempty(("region", region))
        body = self._post(
            "/v1/inpaint",
            {
                "image_png_b64": wire.encode_image(img),
                "mask_png_b64": wire.encode_mask(region),
                "prompt": prompt,
                "seed": seed,
            },
        )
        data = self._field(body, "/v1/inpaint", "image_png_b64")
        try:
            return wire.decode_image(data)
        except Exception:
            size = len(data) if isinstance(data, (str, bytes)) else 0
            raise BackendUnavailable(
                f"{self.endpoint.base_url}/v1/inpaint sent an undecodable image ({size} bytes)",
                endpoint=f"{self.endpoint.base_url}/v1/inpaint",
            ) from None
