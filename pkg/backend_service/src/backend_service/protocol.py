"""Wire protocol types and codecs.

Route and field names are normative for the provider protocol; they must stay
byte-identical to what the completion engine's client sends and expects.
"""
from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image
from pydantic import BaseModel

ROUTES = (
    "/v1/ground_segment",
    "/v1/tags",
    "/v1/detect_segments",
    "/v1/occlusion_order",
    "/v1/score",
    "/v1/inpaint",
)


def decode_image(data: str) -> np.ndarray:
    """base64 PNG -> (h, w, 3) uint8."""
    img = Image.open(io.BytesIO(base64.b64decode(data))).convert("RGB")
    return np.asarray(img)


def encode_image(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_mask(data: str) -> np.ndarray:
    """base64 PNG -> (h, w) bool."""
    img = Image.open(io.BytesIO(base64.b64decode(data))).convert("L")
    return np.asarray(img) > 127


def encode_mask(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


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


class SegmentOut(BaseModel):
    label: str
    mask_png_b64: str


class DetectSegmentsResponse(BaseModel):
    segments: list[SegmentOut]


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
