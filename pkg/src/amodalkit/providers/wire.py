"""Wire protocol shared by every backend: JSON bodies, images and masks as base64 PNG.

Field names here are normative; the mock server, the reference backend
service, and any third-party backend must match them byte for byte.
"""
from __future__ import annotations

import base64

from pydantic import BaseModel

from ..imaging import Image
from ..masks import BinaryMask

ROUTES = (
    "/v1/ground_segment",
    "/v1/tags",
    "/v1/detect_segments",
    "/v1/occlusion_order",
    "/v1/score",
    "/v1/inpaint",
)


def encode_image(img: Image) -> str:
    return base64.b64encode(img.to_png_bytes()).decode("ascii")


def decode_image(data: str) -> Image:
    return Image.from_png_bytes(base64.b64decode(data))


def encode_mask(mask: BinaryMask) -> str:
    return base64.b64encode(mask.to_png_bytes()).decode("ascii")


def decode_mask(data: str) -> BinaryMask:
    return BinaryMask.from_png_bytes(base64.b64decode(data))


class GroundSegmentRequest(BaseModel):
    image_png_b64: str
    query: str


class GroundSegmentResponse(BaseModel):
    found: bool
    mask_png_b64: str | None = None


class TagsRequest(BaseModel):
    image_png_b64: str


class TagsResponse(BaseModel):
    tags: list[str]


class DetectSegmentsRequest(BaseModel):
    image_png_b64: str
    tags: list[str]


class WireSegment(BaseModel):
    label: str
    mask_png_b64: str


class DetectSegmentsResponse(BaseModel):
    segments: list[WireSegment]


class OcclusionOrderRequest(BaseModel):
    image_png_b64: str
    target_mask_png_b64: str
    candidate_mask_png_b64: str


class OcclusionOrderResponse(BaseModel):
    occludes_target: bool


class ScoreRequest(BaseModel):
    image_png_b64: str
    text: str


class ScoreResponse(BaseModel):
    score: float


class InpaintRequest(BaseModel):
    image_png_b64: str
    mask_png_b64: str
    prompt: str
    seed: int | None = None


class InpaintResponse(BaseModel):
    image_png_b64: str


class ErrorResponse(BaseModel):
    error: str
