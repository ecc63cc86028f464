"""Abstract contracts for the six pretrained-model roles.

Every role is reachable either in-process (scene-backed mocks) or over the
wire (remote backends speaking the JSON/base64-PNG protocol); the engine only
ever talks to this interface.
"""
from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..imaging import Image
from ..masks import BinaryMask

log = logging.getLogger("amodalkit.providers")


@dataclass(frozen=True)
class TagSet:
    """Ordered, deduplicated, lowercase class labels."""

    tags: tuple[str, ...]

    def __post_init__(self):
        if list(self.tags) != list(dict.fromkeys(t.lower() for t in self.tags)):
            raise ValueError("tags must be lowercase and deduplicated; use from_iterable")

    @classmethod
    def from_iterable(cls, items) -> "TagSet":
        return cls(tuple(dict.fromkeys(t.strip().lower() for t in items if t.strip())))

    def __iter__(self):
        return iter(self.tags)

    def __len__(self):
        return len(self.tags)

    def __contains__(self, tag: str) -> bool:
        return tag in self.tags


@dataclass(frozen=True)
class OcclusionRelation:
    occludes_target: bool


@dataclass(frozen=True)
class Score:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"score must be finite, got {self.value}")


@dataclass(frozen=True)
class Segment:
    label: str
    mask: BinaryMask


@dataclass(frozen=True)
class ProviderEndpoint:
    base_url: str
    timeout: float = 10.0
    retries: int = 0
    auth_token: str | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def check_query(query: str) -> None:
    if not query or not query.strip():
        raise ValueError("query must be non-empty")


def check_masks_nonempty(*named: tuple[str, BinaryMask]) -> None:
    for name, mask in named:
        if mask.is_empty():
            raise ValueError(f"{name} mask must be non-empty")


class Providers(abc.ABC):
    """One method per model role; implementations must be safe under concurrent calls."""

    @abc.abstractmethod
    def ground_segment(self, img: Image, query: str) -> BinaryMask | None:
        """Visible mask of the queried object, or None when the query grounds nothing."""

    @abc.abstractmethod
    def tag_scene(self, img: Image) -> TagSet:
        """Candidate class labels for recognizable content."""

    @abc.abstractmethod
    def detect_segments(self, img: Image, tags: TagSet) -> list[Segment]:
        """Visible-region mask per detected instance; masks may overlap."""

    @abc.abstractmethod
    def occlusion_order(self, img: Image, target: BinaryMask, candidate: BinaryMask) -> OcclusionRelation:
        """Whether the candidate segment occludes the target."""

    @abc.abstractmethod
    def score_text_image(self, img: Image, text: str) -> Score:
        """Deterministic text/image match score; higher is better."""

    @abc.abstractmethod
    def inpaint(self, img: Image, region: BinaryMask, prompt: str, seed: int = 0) -> Image:
        """Repaint the region guided by the prompt; outside pixels must be preserved."""


class SafeProviders(Providers):
    """Engine-side guard: restores out-of-region pixels on every inpaint result.

    Any backend that repaints outside its mask gets its output corrected, with
    the violation logged rather than propagated.
    """

    def __init__(self, inner: Providers):
        self.inner = inner

    def ground_segment(self, img, query):
        check_query(query)
        return self.inner.ground_segment(img, query)

    def tag_scene(self, img):
        return self.inner.tag_scene(img)

    def detect_segments(self, img, tags):
        return self.inner.detect_segments(img, tags)

    def occlusion_order(self, img, target, candidate):
        check_masks_nonempty(("target", target), ("candidate", candidate))
        return self.inner.occlusion_order(img, target, candidate)

    def score_text_image(self, img, text):
        check_query(text)
        return self.inner.score_text_image(img, text)

    def inpaint(self, img, region, prompt, seed: int = 0):
        check_masks_nonempty(("region", region))
        out = self.inner.inpaint(img, region, prompt, seed=seed)
        if out.shape != img.shape:
            log.warning(
                "inpaint backend changed canvas size %s -> %s; keeping input outside region",
                img.shape, out.shape,
            )
            fixed = img.pixels.copy()
            return Image(fixed)
        outside = ~region.bits
        if not np.array_equal(out.pixels[outside], img.pixels[outside]):
            changed = int(np.count_nonzero(
                np.any(out.pixels != img.pixels, axis=2) & outside
            ))
            log.warning("inpaint backend modified %d pixels outside region; restored", changed)
            fixed = out.pixels.copy()
            fixed[outside] = img.pixels[outside]
            return Image(fixed)
        return out
