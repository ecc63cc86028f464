"""Scene-backed provider mocks.

``SceneProviders`` answers every role from a synthetic scene's exact ground
truth, so a pipeline run against it has a known right answer.  The inpainting
role comes in two flavors:

* oracle (default): paints the true appearance of the prompted shape inside
  the requested region, background elsewhere — completion can reach IoU 1.0.
* churn: alternates between claiming the whole region and wiping it on every
  call, so masks never stabilize and the iteration cap must fire.
"""
from __future__ import annotations

import numpy as np

from .. import synth
from ..imaging import Image
from ..masks import BinaryMask
from .base import (
    OcclusionRelation,
    Providers,
    Score,
    Segment,
    TagSet,
    check_masks_nonempty,
    check_query,
)

CHURN_MARKER = (255, 0, 255)

MATCH_SCORE = 1.0
MISS_SCORE = 0.2


def _nonbackground(img: Image, bg: tuple[int, int, int]) -> np.ndarray:
    return np.any(img.pixels != np.array(bg, dtype=np.uint8), axis=2)


class SceneProviders(Providers):
    def __init__(self, scene: synth.SyntheticScene, churn_inpaint: bool = False):
        self.scene = scene
        self.churn_inpaint = churn_inpaint
        self._visible = {s.name: synth.visible_mask(scene, s.name) for s in scene.shapes}

    # --- grounding ---------------------------------------------------------

    def _match_name(self, query: str) -> str | None:
        q = query.strip().lower()
        names = set(self.scene.names())
        if q in names:
            return q
        tokens = [t.strip(".,!?") for t in q.split()]
        hits = [t for t in tokens if t in names]
        if len(hits) == 1:
            return hits[0]
        return None

    def ground_segment(self, img, query):
        check_query(query)
        name = self._match_name(query)
        if name is None:
            return None
        return self._visible[name]

    # --- tagging / detection ------------------------------------------------

    def tag_scene(self, img):
        ordered = sorted(self.scene.shapes, key=lambda s: -s.z)
        return TagSet.from_iterable(s.name for s in ordered)

    def detect_segments(self, img, tags):
        out = []
        ordered = sorted(self.scene.shapes, key=lambda s: -s.z)
        for s in ordered:
            if s.name not in tags:
                continue
            vis = self._visible[s.name]
            if not vis.is_empty():
                out.append(Segment(label=s.name, mask=vis))
        return out

    # --- occlusion ordering ---------------------------------------------------

    def _shape_for_mask(self, mask: BinaryMask) -> str | None:
        best_name, best_iou = None, 0.0
        for name, vis in self._visible.items():
            if vis.shape != mask.shape:
                continue
            if vis == mask:
                return name
            inter = int(np.count_nonzero(vis.bits & mask.bits))
            un = int(np.count_nonzero(vis.bits | mask.bits))
            iou = inter / un if un else 0.0
            if iou > best_iou:
                best_name, best_iou = name, iou
        return best_name if best_iou >= 0.5 else None

    def occlusion_order(self, img, target, candidate):
        check_masks_nonempty(("target", target), ("candidate", candidate))
        t = self._shape_for_mask(target)
        c = self._shape_for_mask(candidate)
        if t is None or c is None or t == c:
            return OcclusionRelation(occludes_target=False)
        return OcclusionRelation(occludes_target=synth.occlusion_truth(self.scene, t, c))

    # --- scoring -----------------------------------------------------------------

    def score_text_image(self, img, text):
        check_query(text)
        nonbg = _nonbackground(img, self.scene.background_color)
        if not nonbg.any():
            return Score(MISS_SCORE)
        ys, xs = np.nonzero(nonbg)
        top = (int(ys.min()), int(xs.min()))
        for name, vis in self._visible.items():
            if vis.is_empty():
                continue
            vys, vxs = np.nonzero(vis.bits)
            dy = top[0] - int(vys.min())
            dx = top[1] - int(vxs.min())
            shifted = np.zeros_like(nonbg)
            src = vis.bits
            h, w = nonbg.shape
            sy0, sx0 = max(0, dy), max(0, dx)
            ty0, tx0 = max(0, -dy), max(0, -dx)
            hh = min(h - sy0, src.shape[0] - ty0)
            ww = min(w - sx0, src.shape[1] - tx0)
            if hh <= 0 or ww <= 0:
                continue
            shifted[sy0 : sy0 + hh, sx0 : sx0 + ww] = src[ty0 : ty0 + hh, tx0 : tx0 + ww]
            if np.array_equal(shifted, nonbg):
                return Score(MATCH_SCORE if text.strip().lower() == name else MISS_SCORE)
        return Score(MISS_SCORE)

    # --- inpainting -----------------------------------------------------------------

    def _prompted_shape(self, prompt: str) -> str | None:
        tokens = {t.strip(".,!?") for t in prompt.strip().lower().split()}
        hits = [s.name for s in self.scene.shapes if s.name in tokens]
        return hits[0] if len(hits) == 1 else None

    def _infer_offset(self, img: Image, name: str) -> tuple[int, int]:
        w, h = self.scene.canvas
        dw, dh = img.width - w, img.height - h
        if dw == 0 and dh == 0:
            return (0, 0)
        nonbg = _nonbackground(img, self.scene.background_color)
        xs = sorted({0, dw // 2, dw} | (set(range(dw + 1)) if dw <= 8 else set()))
        ys = sorted({0, dh // 2, dh} | (set(range(dh + 1)) if dh <= 8 else set()))
        best, best_score = (0, 0), None
        for oy in ys:
            for ox in xs:
                amodal = synth.amodal_mask_on(self.scene, name, (img.width, img.height), (ox, oy))
                score = int(np.count_nonzero(nonbg & amodal.bits)) - int(
                    np.count_nonzero(nonbg & ~amodal.bits)
                )
                if best_score is None or score > best_score:
                    best, best_score = (ox, oy), score
        return best

    def _oracle_inpaint(self, img: Image, region: BinaryMask, prompt: str) -> Image:
        out = img.pixels.copy()
        bg = np.array(self.scene.background_color, dtype=np.uint8)
        out[region.bits] = bg
        name = self._prompted_shape(prompt)
        if name is not None:
            offset = self._infer_offset(img, name)
            dims = (img.width, img.height)
            amodal = synth.amodal_mask_on(self.scene, name, dims, offset)
            fill = synth.fill_image(self.scene.shape(name), dims, offset)
            paint = region.bits & amodal.bits
            out[paint] = fill.pixels[paint]
        return Image(out)

    def _churn_inpaint(self, img: Image, region: BinaryMask, seed: int) -> Image:
        out = img.pixels.copy()
        marker = np.array(CHURN_MARKER, dtype=np.uint8)
        # the marker left by the previous claim tells this call to wipe; the
        # region only ever grows, so scanning it finds any marker we planted
        marked = np.all(img.pixels == marker, axis=2) & region.bits
        if marked.any():
            out[region.bits] = np.array(self.scene.background_color, dtype=np.uint8)
        else:
            color = synth.PALETTE[seed % len(synth.PALETTE)]
            out[region.bits] = np.array(color, dtype=np.uint8)
            ys, xs = np.nonzero(region.bits)
            out[int(ys[0]), int(xs[0])] = marker
        return Image(out)

    def inpaint(self, img, region, prompt, seed: int = 0):
        check_masks_nonempty(("region", region))
        if self.churn_inpaint:
            return self._churn_inpaint(img, region, seed)
        return self._oracle_inpaint(img, region, prompt)
