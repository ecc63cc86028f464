"""End-to-end completion: isolate, inpaint iteratively, blend, emit RGBA."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import masks as mk
from .config import PipelineConfig
from .errors import TargetNotFound
from .imaging import (
    AlphaMap,
    BackgroundFill,
    Image,
    Margins,
    RgbaImage,
    alpha_blend,
    alpha_transition,
    assemble_rgba,
    composite,
    crop_canvas,
    pad_canvas,
)
from .masks import BinaryMask, StructuringElement
from .occlusion import OcclusionReport, build_occluder_mask, expand_boundary
from .prompting import PromptSelection, select_prompt
from .providers.base import Providers, SafeProviders
from .scene import segment_scene


@dataclass(frozen=True)
class TerminationCheck:
    stop: bool
    reason: str | None  # "stabilized" | "max_iterations"


def should_terminate(
    prev_occ: BinaryMask, next_occ: BinaryMask, t: int, cfg: PipelineConfig
) -> TerminationCheck:
    """Stop when the mask change drops below epsilon or the iteration cap is hit."""
    delta = mk.l1_diff(prev_occ, next_occ)
    threshold = math.ceil(cfg.epsilon_frac * prev_occ.width * prev_occ.height)
    if delta < threshold:
        return TerminationCheck(stop=True, reason="stabilized")
    if t + 1 >= cfg.max_iterations:
        return TerminationCheck(stop=True, reason="max_iterations")
    return TerminationCheck(stop=False, reason=None)


def init_target(img: Image, visible: BinaryMask, cfg: PipelineConfig) -> Image:
    """Isolate the target: visible pixels kept, everything else goes to clean background."""
    if visible.is_empty():
        raise ValueError("visible mask must be non-empty")
    return composite(img, visible, cfg.background)


def update_amodal(inpainted: Image, visible: BinaryMask, cfg: PipelineConfig) -> BinaryMask:
    """Current estimate of the completed object's mask.

    Pixels deviating from the solid background beyond the tolerance, unioned
    with the visible mask, filtered to components that touch the visible mask,
    then closed (radius 1) to seal rasterization pinholes.  Image-mode
    backgrounds have no color to diff against and must be resolved by a
    provider re-segmentation instead.
    """
    if not cfg.background.is_solid:
        raise ValueError("update_amodal requires a solid background fill")
    bg = np.array(cfg.background.color, dtype=np.int16)
    dev = np.abs(inpainted.pixels.astype(np.int16) - bg).max(axis=2)
    claimed = BinaryMask((dev > cfg.amodal_tolerance) | visible.bits)
    keep = np.zeros(claimed.shape, dtype=bool)
    for comp in mk.connected_components(claimed, cfg.connectivity):
        if (comp.bits & visible.bits).any():
            keep |= comp.bits
    return mk.close_mask(BinaryMask(keep), StructuringElement("square", 1))


@dataclass(frozen=True)
class IterationTrace:
    index: int
    occ_mask_before: BinaryMask
    occ_mask_after: BinaryMask
    l1_delta: int
    amodal_l1_delta: int
    inpainted: Image
    amodal: BinaryMask


@dataclass(frozen=True)
class CompletionResult:
    status: str  # "completed" | "target_not_found"
    rgba: RgbaImage
    amodal: BinaryMask
    visible: BinaryMask | None
    prompt: PromptSelection | None
    iterations: tuple[IterationTrace, ...]
    termination: str | None
    canvas_offset: tuple[int, int]
    report: OcclusionReport | None
    query: str

    def trace_dict(self, cfg: PipelineConfig) -> dict:
        """Deterministic run summary for trace.json (no wall-clock content)."""
        d = {
            "query": self.query,
            "status": self.status,
            "termination": self.termination,
            "canvas_offset": list(self.canvas_offset),
            "config": {k: v for k, v in sorted(cfg.to_dict().items())},
            "prompt": None,
            "iterations": [
                {
                    "index": it.index,
                    "l1_delta": it.l1_delta,
                    "amodal_l1_delta": it.amodal_l1_delta,
                }
                for it in self.iterations
            ],
        }
        if self.prompt is not None:
            d["prompt"] = {
                "selected": self.prompt.prompt,
                "scores": [
                    {"candidate": s.candidate, "score": s.score} for s in self.prompt.scores
                ],
            }
        if self.report is not None:
            d["occlusion"] = {
                "queries_made": self.report.queries_made,
                "queries_skipped": self.report.queries_skipped,
                "boundary_edges": list(self.report.boundary_edges),
                "occluders": [o.source for o in self.report.occluders],
            }
        return d


def _not_found(img: Image, query: str) -> CompletionResult:
    empty_rgba = RgbaImage(np.zeros((img.height, img.width, 4), dtype=np.uint8))
    return CompletionResult(
        status="target_not_found",
        rgba=empty_rgba,
        amodal=BinaryMask.empty(img.width, img.height),
        visible=None,
        prompt=None,
        iterations=(),
        termination=None,
        canvas_offset=(0, 0),
        report=None,
        query=query,
    )


def _pad_for_boundary(img, visible, occ, edges, cfg: PipelineConfig):
    """Grow the canvas along contacted edges and mark the new margin for outpainting."""
    r = cfg.boundary_radius
    margins = Margins(
        top=r if "top" in edges else 0,
        bottom=r if "bottom" in edges else 0,
        left=r if "left" in edges else 0,
        right=r if "right" in edges else 0,
    )
    padded, offset = pad_canvas(img, margins, cfg.background)
    dims = (padded.width, padded.height)
    visible_p = mk.translate(visible, offset, dims)
    occ_p = mk.translate(occ, offset, dims)
    original_area = mk.translate(BinaryMask.full(img.width, img.height), offset, dims)
    margin_region = BinaryMask(~original_area.bits)
    reach = mk.dilate(visible_p, StructuringElement("square", r))
    occ_p = mk.union(occ_p, mk.intersect(reach, margin_region))
    occ_p = mk.subtract(occ_p, visible_p)
    return padded, offset, visible_p, occ_p


def run_completion(
    img: Image, query: str, providers: Providers, cfg: PipelineConfig | None = None
) -> CompletionResult:
    """Reconstruct the queried object's full appearance as an RGBA layer."""
    cfg = cfg or PipelineConfig()
    safe = SafeProviders(providers)

    try:
        decomp = segment_scene(img, safe, query, cfg)
    except TargetNotFound:
        return _not_found(img, query)
    visible = decomp.visible
    if visible.is_empty():
        return _not_found(img, query)

    report = build_occluder_mask(img, visible, decomp.seg, safe, cfg)
    expansion = expand_boundary(report.occ_mask, visible, cfg)
    report = report.with_edges(expansion.edges)

    if expansion.edges:
        work_img, offset, visible_w, occ = _pad_for_boundary(
            img, visible, expansion.occ, expansion.edges, cfg
        )
    else:
        work_img, offset, visible_w, occ = img, (0, 0), visible, expansion.occ

    selection = select_prompt(work_img, visible_w, decomp.seg.tags, query, safe, cfg.background)
    inpaint_prompt = cfg.prompt_template.format(descriptor=selection.prompt)

    current = init_target(work_img, visible_w, cfg)
    amodal = visible_w
    traces: list[IterationTrace] = []
    termination = "stabilized"

    if not occ.is_empty():
        for t in range(cfg.max_iterations):
            current = safe.inpaint(current, occ, inpaint_prompt, seed=cfg.inpaint_seed)
            if cfg.background.is_solid:
                amodal_next = update_amodal(current, visible_w, cfg)
            else:
                reseg = safe.ground_segment(current, query)
                amodal_next = reseg if reseg is not None else amodal
            additions = mk.subtract(mk.subtract(amodal_next, amodal), visible_w)
            occ_next = mk.union(occ, additions)

            occ_check = should_terminate(occ, occ_next, t, cfg)
            amodal_check = should_terminate(amodal, amodal_next, t, cfg)
            traces.append(
                IterationTrace(
                    index=t,
                    occ_mask_before=occ,
                    occ_mask_after=occ_next,
                    l1_delta=mk.l1_diff(occ, occ_next),
                    amodal_l1_delta=mk.l1_diff(amodal, amodal_next),
                    inpainted=current,
                    amodal=amodal_next,
                )
            )
            occ, amodal = occ_next, amodal_next
            # the run has stabilized only when *both* tracked masks have; a
            # backend that keeps repainting shows up in the amodal sequence
            # even though the occluder mask only ever accumulates
            if occ_check.stop and amodal_check.stop:
                if occ_check.reason == "stabilized" and amodal_check.reason == "stabilized":
                    termination = "stabilized"
                else:
                    termination = "max_iterations"
                break

    transition = alpha_transition(visible_w, cfg.transition_width)
    # deep inside the visible mask the original content must win bit-exact,
    # so the inpainted image carries the complement of the transition weight
    inpaint_weight = AlphaMap(1.0 - transition.values)
    blend = alpha_blend(current, work_img, inpaint_weight)
    rgba = assemble_rgba(blend, amodal)

    canvas_offset = offset
    if expansion.edges and not cfg.keep_expanded_canvas:
        dims = (img.width, img.height)
        rgba_arr = rgba.pixels[offset[1] : offset[1] + img.height, offset[0] : offset[0] + img.width]
        rgba = RgbaImage(rgba_arr)
        amodal = mk.crop(amodal, offset, dims)
        visible_w = mk.crop(visible_w, offset, dims)
        canvas_offset = (0, 0)

    return CompletionResult(
        status="completed",
        rgba=rgba,
        amodal=amodal,
        visible=visible_w,
        prompt=selection,
        iterations=tuple(traces),
        termination=termination,
        canvas_offset=canvas_offset,
        report=report,
        query=query,
    )
