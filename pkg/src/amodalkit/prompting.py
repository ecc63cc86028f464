"""Inpainting prompt selection by scored argmax over tags plus the raw query.

The scorer sees only the target: everything outside the visible mask is
swapped for the clean background first, so surrounding content cannot steer
the choice.  Abstract queries usually lose to a concrete tag here, which is
how a query like "the animal in this image" turns into a paintable word.
"""
from __future__ import annotations

from dataclasses import dataclass

from .imaging import BackgroundFill, Image, composite
from .masks import BinaryMask
from .providers.base import Providers, TagSet


@dataclass(frozen=True)
class CandidateScore:
    candidate: str
    score: float


@dataclass(frozen=True)
class PromptSelection:
    prompt: str
    scores: tuple[CandidateScore, ...]
    swapped_target: Image


def select_prompt(
    img: Image,
    visible: BinaryMask,
    tags: TagSet,
    query: str,
    scorer: Providers,
    bkgd: BackgroundFill,
) -> PromptSelection:
    """Argmax over tags-then-query; ties break toward the earliest candidate."""
    if visible.is_empty():
        raise ValueError("visible mask must be non-empty")
    if not query.strip():
        raise ValueError("query must be non-empty")

    swapped = composite(img, visible, bkgd)
    candidates = list(tags) + [query]
    scores = tuple(
        CandidateScore(candidate=c, score=scorer.score_text_image(swapped, c).value)
        for c in candidates
    )
    best = max(range(len(scores)), key=lambda i: (scores[i].score, -i))
    return PromptSelection(prompt=scores[best].candidate, scores=scores, swapped_target=swapped)
