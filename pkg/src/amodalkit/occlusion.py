"""Occluder-mask construction and boundary-aware expansion."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import masks as mk
from .config import PipelineConfig
from .imaging import Image
from .masks import BinaryMask, EdgeSet, StructuringElement
from .providers.base import Providers
from .scene import SceneSegmentation


@dataclass(frozen=True)
class Occluder:
    source: str  # "object:<label>" or "background:<index>"
    mask: BinaryMask  # contribution: segment pixels minus the target's visible pixels


@dataclass(frozen=True)
class OcclusionReport:
    occluders: tuple[Occluder, ...]
    occ_mask: BinaryMask  # pre-expansion snapshot; equals the union of occluder contributions
    boundary_edges: EdgeSet
    queries_made: int
    queries_skipped: int

    def with_edges(self, edges: EdgeSet) -> "OcclusionReport":
        return OcclusionReport(
            occluders=self.occluders,
            occ_mask=self.occ_mask,
            boundary_edges=edges,
            queries_made=self.queries_made,
            queries_skipped=self.queries_skipped,
        )


def _candidates(seg: SceneSegmentation):
    for obj in seg.objects:
        yield f"object:{obj.label}", obj.mask
    for i, m in enumerate(seg.background):
        yield f"background:{i + 1}", m


def build_occluder_mask(
    img: Image,
    visible: BinaryMask,
    seg: SceneSegmentation,
    oracle: Providers,
    cfg: PipelineConfig,
    skip_non_adjacent: bool = True,
) -> OcclusionReport:
    """Union the segments the ordering oracle marks as occluding the target.

    Segments nearly identical to the visible mask are the target re-detected
    and are never queried.  With skip_non_adjacent, candidates whose dilated
    mask cannot touch the dilated target are assumed non-occluding without a
    query; the ordering oracle is consulted for everything else.  The target's
    own visible pixels are never claimed by the result.
    """
    if visible.is_empty():
        raise ValueError("visible mask must be non-empty")

    se = StructuringElement("square", cfg.morph_radius)
    target_dilated = mk.dilate(visible, se)

    to_query: list[tuple[str, BinaryMask]] = []
    skipped = 0
    for source, mask in _candidates(seg):
        if mask.is_empty():
            continue
        if mk.metrics(mask, visible).iou >= cfg.self_overlap_iou:
            continue  # the target itself
        if skip_non_adjacent and mk.intersect(mk.dilate(mask, se), target_dilated).is_empty():
            skipped += 1
            continue
        to_query.append((source, mask))

    def ask(item):
        return oracle.occlusion_order(img, visible, item[1]).occludes_target

    if cfg.occlusion_parallelism > 1 and len(to_query) > 1:
        with ThreadPoolExecutor(max_workers=cfg.occlusion_parallelism) as pool:
            answers = list(pool.map(ask, to_query))
    else:
        answers = [ask(item) for item in to_query]

    occluders = []
    acc = BinaryMask.empty(visible.width, visible.height)
    for (source, mask), occludes in zip(to_query, answers):
        if not occludes:
            continue
        contribution = mk.subtract(mask, visible)
        occluders.append(Occluder(source=source, mask=contribution))
        acc = mk.union(acc, contribution)

    return OcclusionReport(
        occluders=tuple(occluders),
        occ_mask=acc,
        boundary_edges=EdgeSet.of(),
        queries_made=len(to_query),
        queries_skipped=skipped,
    )


@dataclass(frozen=True)
class BoundaryExpansion:
    occ: BinaryMask
    edges: EdgeSet


def expand_boundary(occ: BinaryMask, visible: BinaryMask, cfg: PipelineConfig) -> BoundaryExpansion:
    """Grow the occluder mask along canvas edges the visible mask touches.

    Each round unions in the dilated visible mask clipped to the bands along
    the contacted edges, stopping when a round changes nothing or the round
    budget runs out.  The visible pixels themselves stay excluded.
    """
    if occ.shape != visible.shape:
        raise ValueError(f"occ {occ.shape} and visible {visible.shape} must share a canvas")
    edges = mk.boundary_contacts(visible)
    if not edges:
        return BoundaryExpansion(occ=occ, edges=edges)

    se = StructuringElement("square", cfg.boundary_radius)
    reach = mk.dilate(visible, se)
    dims = (visible.width, visible.height)
    current = occ
    for _ in range(cfg.max_boundary_rounds):
        grown = current
        for edge in edges:
            band = mk.edge_band(cfg.band_width, dims, edge)
            grown = mk.union(grown, mk.intersect(reach, band))
        grown = mk.subtract(grown, visible)
        if mk.l1_diff(grown, current) == 0:
            break
        current = grown
    return BoundaryExpansion(occ=current, edges=edges)


def dump_report(report: OcclusionReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.occ_mask.save_png(out / "occ_mask.png")
    index = {
        "boundary_edges": list(report.boundary_edges),
        "queries_made": report.queries_made,
        "queries_skipped": report.queries_skipped,
        "occluders": [],
    }
    for i, occ in enumerate(report.occluders):
        fname = f"occluder_{i:02d}.png"
        occ.mask.save_png(out / fname)
        index["occluders"].append({"source": occ.source, "file": fname})
    (out / "occlusion.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
