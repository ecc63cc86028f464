"""Deterministic canned responses for protocol conformance testing.

Stub mode answers every route without loading any model weights, so CI can
prove the wire contract (routes, field names, error shapes) end to end.
"""
from __future__ import annotations

import numpy as np

STUB_TAG = "stub"
STUB_SCORE = 0.5
STUB_FILL = (127, 127, 127)


def center_box_mask(height: int, width: int) -> np.ndarray:
    """A centered box covering a quarter of the canvas."""
    mask = np.zeros((height, width), dtype=bool)
    mask[height // 4 : height - height // 4, width // 4 : width - width // 4] = True
    return mask


def ground_segment(image: np.ndarray, query: str) -> np.ndarray | None:
    h, w = image.shape[:2]
    return center_box_mask(h, w)


def tags(image: np.ndarray) -> list[str]:
    return [STUB_TAG]


def detect_segments(image: np.ndarray, tag_list: list[str]) -> list[tuple[str, np.ndarray]]:
    h, w = image.shape[:2]
    return [(STUB_TAG, center_box_mask(h, w))]


def occlusion_order(image, target_mask, candidate_mask) -> bool:
    return False


def score(image: np.ndarray, text: str) -> float:
    return STUB_SCORE


def inpaint(image: np.ndarray, mask: np.ndarray, prompt: str, seed: int | None) -> np.ndarray:
    # flat fill inside the mask, input preserved outside
    out = image.copy()
    out[mask] = STUB_FILL
    return out
