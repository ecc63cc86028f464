"""Scene decomposition: target grounding, object segments, background partitioning.

Background partitioning takes the complement of everything any detector
claimed, opens it (erode then dilate with the same element) to cut slivers
where object masks nearly touch, and keeps the resulting connected components
above a minimum area.  Those components are the candidate occluders that no
object-category detector would ever report.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import masks as mk
from .config import PipelineConfig
from .errors import TargetNotFound
from .imaging import Image
from .masks import BinaryMask, StructuringElement
from .providers.base import Providers, Segment, TagSet


@dataclass(frozen=True)
class SceneSegmentation:
    tags: TagSet
    objects: tuple[Segment, ...]
    background: tuple[BinaryMask, ...]


def background_segments(
    dims: tuple[int, int],
    object_masks: list[BinaryMask],
    se: StructuringElement,
    min_area: int,
    connectivity: str = "eight",
) -> list[BinaryMask]:
    """Partition the unclaimed canvas into isolated segments.

    complement of the union -> erode -> dilate -> connected components,
    dropping components smaller than min_area; ordered by descending area.
    """
    w, h = dims
    claimed = mk.union_all(object_masks, w, h)
    leftover = BinaryMask(~claimed.bits)
    refined = mk.dilate(mk.erode(leftover, se), se)
    comps = mk.connected_components(refined, connectivity)
    return [c for c in comps if c.area >= min_area]


@dataclass(frozen=True)
class SceneDecomposition:
    visible: BinaryMask
    seg: SceneSegmentation


def segment_scene(
    img: Image, providers: Providers, query: str, cfg: PipelineConfig
) -> SceneDecomposition:
    """Ground the query and decompose the rest of the scene into candidate occluders."""
    visible = providers.ground_segment(img, query)
    if visible is None:
        raise TargetNotFound(f"query {query!r} grounded no object")

    tags = providers.tag_scene(img)
    objects = tuple(providers.detect_segments(img, tags))

    se = StructuringElement("square", cfg.morph_radius)
    min_area = math.ceil(cfg.min_bg_area_frac * img.width * img.height)
    # the target's own mask joins the union before complementing, so a target
    # the detector missed never leaks into the background partition
    union_input = [s.mask for s in objects] + [visible]
    background = tuple(
        background_segments(
            (img.width, img.height), union_input, se, min_area, cfg.connectivity
        )
    )
    return SceneDecomposition(
        visible=visible,
        seg=SceneSegmentation(tags=tags, objects=objects, background=background),
    )


def dump_segmentation(seg: SceneSegmentation, out_dir) -> None:
    """Debug dump: one PNG per mask plus a JSON index."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = {"tags": list(seg.tags), "objects": [], "background": []}
    for i, obj in enumerate(seg.objects):
        fname = f"object_{i:02d}_{obj.label}.png"
        obj.mask.save_png(out / fname)
        index["objects"].append({"label": obj.label, "file": fname})
    for i, m in enumerate(seg.background):
        fname = f"background-{i + 1}.png"
        m.save_png(out / fname)
        index["background"].append(fname)
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
