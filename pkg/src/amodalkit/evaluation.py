"""Quantitative metrics and study-aggregation statistics.

SSIM is computed natively (luma channel, Gaussian-weighted local windows with
the standard constants).  Perceptual/semantic similarity scores are network
forward passes and therefore delegate to a provider's scoring endpoint; when
no backend is configured they are reported as missing rather than faked.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AmodalkitError, DimensionMismatch
from .imaging import Image
from .masks import BinaryMask

LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # Rec. 601


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0


def _luma(img: Image) -> np.ndarray:
    r, g, b = LUMA_WEIGHTS
    px = img.pixels.astype(np.float64)
    return r * px[:, :, 0] + g * px[:, :, 1] + b * px[:, :, 2]


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size) - half
    k1d = np.exp(-(xs**2) / (2.0 * sigma**2))
    k2d = np.outer(k1d, k1d)
    return k2d / k2d.sum()


def _windowed_mean(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(values, kernel.shape)
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


def ssim(a: Image, b: Image, params: SsimParams | None = None) -> float:
    """Mean local structural similarity on the luma channel; symmetric in its arguments."""
    params = params or SsimParams()
    if a.shape != b.shape:
        raise DimensionMismatch("ssim", a.shape, b.shape)
    if min(a.width, a.height) < params.window:
        raise ValueError(
            f"image {a.width}x{a.height} smaller than ssim window {params.window}"
        )
    kernel = _gaussian_kernel(params.window, params.sigma)
    x = _luma(a)
    y = _luma(b)
    mu_x = _windowed_mean(x, kernel)
    mu_y = _windowed_mean(y, kernel)
    xx = _windowed_mean(x * x, kernel)
    yy = _windowed_mean(y * y, kernel)
    xy = _windowed_mean(x * y, kernel)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def masked_region(img: Image, m: BinaryMask, fill: tuple[int, int, int] = (127, 127, 127)) -> Image:
    """Bounding-box crop of the mask with everything outside the mask flattened to fill."""
    if img.shape != m.shape:
        raise DimensionMismatch("masked_region", img.shape, m.shape)
    if m.is_empty():
        raise ValueError("masked_region needs a non-empty mask")
    ys, xs = np.nonzero(m.bits)
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    crop = img.pixels[y0:y1, x0:x1].copy()
    keep = m.bits[y0:y1, x0:x1]
    crop[~keep] = fill
    return Image(crop)


# ---------------------------------------------------------------------------
# failure accounting


@dataclass(frozen=True)
class FailureRates:
    per_dataset: dict[str, Fraction]
    overall: Fraction
    counts: dict[str, tuple[int, int]]  # dataset -> (failures, total)

    def formatted(self, dataset: str | None = None) -> str:
        rate = self.overall if dataset is None else self.per_dataset[dataset]
        return f"{float(rate) * 100:.1f}%"


def failure_table(outcomes: list[dict]) -> FailureRates:
    """Complete-failure proportion per dataset tag and overall, kept exact."""
    if not outcomes:
        raise ValueError("failure_table needs at least one outcome")
    counts: dict[str, list[int]] = {}
    for item in outcomes:
        dataset = str(item.get("dataset", "all"))
        failed = item["status"] == "target_not_found"
        bucket = counts.setdefault(dataset, [0, 0])
        bucket[0] += int(failed)
        bucket[1] += 1
    per_dataset = {d: Fraction(f, t) for d, (f, t) in counts.items()}
    total_f = sum(f for f, _ in counts.values())
    total_n = sum(t for _, t in counts.values())
    return FailureRates(
        per_dataset=per_dataset,
        overall=Fraction(total_f, total_n),
        counts={d: (f, t) for d, (f, t) in counts.items()},
    )


# ---------------------------------------------------------------------------
# inter-rater agreement


class DegenerateAgreement(AmodalkitError):
    """Expected agreement is 1, so chance-corrected agreement is undefined."""


@dataclass(frozen=True)
class RatingsTable:
    """counts[i, j] = how many raters put item i into category j."""

    counts: np.ndarray
    raters_per_item: int = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] < 1 or counts.shape[1] < 2:
            raise ValueError("ratings need at least 1 item and 2 categories")
        if (counts < 0).any():
            raise ValueError("rating counts must be non-negative")
        sums = counts.sum(axis=1)
        if len(set(sums.tolist())) != 1:
            raise ValueError("every item must have the same number of ratings")
        n = int(sums[0])
        if n < 2:
            raise ValueError("need at least 2 raters per item")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "raters_per_item", n)


def fleiss_kappa(table: RatingsTable) -> float:
    """Chance-corrected agreement for a fixed number of raters per item."""
    counts = table.counts.astype(np.float64)
    n = table.raters_per_item
    n_items = counts.shape[0]
    p_i = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1))
    p_bar = float(np.mean(p_i))
    p_j = counts.sum(axis=0) / (n_items * n)
    p_e = float(np.sum(p_j * p_j))
    if p_e == 1.0:
        raise DegenerateAgreement("expected agreement is 1; kappa is undefined")
    return (p_bar - p_e) / (1.0 - p_e)


def agreement_distribution(choices: list[tuple[str, str, str]]) -> dict[str, int]:
    """Per-image consensus level among exactly three raters: 3/3, 2/3 or 1/3."""
    out = {"3/3": 0, "2/3": 0, "1/3": 0}
    for picks in choices:
        if len(picks) != 3:
            raise ValueError(f"expected exactly 3 rater picks per image, got {len(picks)}")
        top = max(picks.count(p) for p in picks)
        out[f"{top}/3"] += 1
    return out


def ratings_from_csv(path) -> RatingsTable:
    """CSV columns: image_id, rater_id, chosen_method."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"image_id", "rater_id", "chosen_method"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"ratings CSV must have columns {sorted(required)}")
        rows = list(reader)
    if not rows:
        raise ValueError("ratings CSV has no data rows")
    methods = sorted({r["chosen_method"] for r in rows})
    images = sorted({r["image_id"] for r in rows})
    method_idx = {m: j for j, m in enumerate(methods)}
    image_idx = {im: i for i, im in enumerate(images)}
    counts = np.zeros((len(images), max(len(methods), 2)), dtype=np.int64)
    for r in rows:
        counts[image_idx[r["image_id"]], method_idx[r["chosen_method"]]] += 1
    return RatingsTable(counts=counts)


def area_ratio_ok(visible: BinaryMask, threshold: float = 0.02) -> bool:
    """Keep items whose visible area is at least the threshold fraction of the canvas."""
    canvas = visible.width * visible.height
    return visible.area / canvas >= threshold


# ---------------------------------------------------------------------------
# run-vs-truth report


def provider_scores(pred: Image, label: str, scorer) -> float | None:
    """Text/image alignment via the scoring backend; None when the backend is absent."""
    from .errors import BackendUnavailable

    if not label.strip():
        raise ValueError("label must be non-empty")
    if scorer is None:
        return None
    try:
        return scorer.score_text_image(pred, label).value
    except BackendUnavailable:
        return None


def _layer_over_gray(rgba_pixels: np.ndarray, gray=(127, 127, 127)) -> Image:
    base = np.empty(rgba_pixels.shape[:2] + (3,), dtype=np.uint8)
    base[:] = gray
    on = rgba_pixels[:, :, 3] == 255
    base[on] = rgba_pixels[:, :, :3][on]
    return Image(base)


def build_report(results_dir, truth_dir, scorer=None, params: SsimParams | None = None) -> dict:
    """Score every completed run against its scene's exact ground truth.

    results_dir holds per-job directories (trace.json, result.png, amodal.png);
    truth_dir holds per-job scene bundles (scene.json).  The queried shape name
    is taken from the trace.
    """
    import json
    from pathlib import Path

    from . import masks as mk
    from . import synth
    from .imaging import RgbaImage

    params = params or SsimParams()
    items = []
    outcomes = []
    for job_dir in sorted(Path(results_dir).iterdir()):
        trace_path = job_dir / "trace.json"
        if not trace_path.is_file():
            continue
        trace = json.loads(trace_path.read_text())
        item = {
            "id": job_dir.name,
            "status": trace["status"],
            "dataset": trace.get("dataset"),
            "query": trace["query"],
        }
        outcomes.append({"dataset": trace.get("dataset") or "all", "status": trace["status"]})
        if trace["status"] == "completed":
            scene = synth.load_scene(Path(truth_dir) / job_dir.name / "scene.json")
            w, h = scene.canvas
            amodal = BinaryMask.load_png(job_dir / "amodal.png")
            rgba = RgbaImage.load_png(job_dir / "result.png")
            ox, oy = trace.get("canvas_offset", [0, 0])
            if amodal.shape != (h, w):
                amodal = mk.crop(amodal, (ox, oy), (w, h))
                rgba = RgbaImage(rgba.pixels[oy : oy + h, ox : ox + w])
            name = trace["query"].strip().lower()
            truth_amodal = synth.amodal_mask(scene, name)
            item["iou"] = mk.metrics(amodal, truth_amodal).iou
            pred_rgb = _layer_over_gray(rgba.pixels)
            truth_fill = synth.fill_image(scene.shape(name), scene.canvas)
            truth_rgb = Image(
                np.where(truth_amodal.bits[:, :, None], truth_fill.pixels, 127).astype(np.uint8)
            )
            item["ssim"] = ssim(pred_rgb, truth_rgb, params)
            item["clip_score"] = provider_scores(pred_rgb, name, scorer)
        items.append(item)

    if not items:
        raise ValueError(f"no job directories with trace.json under {results_dir}")

    rates = failure_table(outcomes)
    ious = [i["iou"] for i in items if i.get("iou") is not None]
    ssims = [i["ssim"] for i in items if i.get("ssim") is not None]
    scores = [i["clip_score"] for i in items if i.get("clip_score") is not None]

    def stats(values):
        if not values:
            return {"mean": None, "median": None, "count": 0}
        return {
            "mean": float(np.mean(values)),
            "median": float(np.median(values)),
            "count": len(values),
        }

    counts: dict[str, int] = {}
    for i in items:
        counts[i["status"]] = counts.get(i["status"], 0) + 1

    return {
        "items": items,
        "counts": dict(sorted(counts.items())),
        "aggregates": {"iou": stats(ious), "ssim": stats(ssims), "clip_score": stats(scores)},
        "failure_rates": {
            "overall": rates.formatted(),
            "per_dataset": {d: rates.formatted(d) for d in sorted(rates.per_dataset)},
            "counts": {d: list(c) for d, c in sorted(rates.counts.items())},
        },
        "ssim_params": {
            "window": params.window,
            "sigma": params.sigma,
            "k1": params.k1,
            "k2": params.k2,
            "dynamic_range": params.dynamic_range,
        },
    }


def render_table(report: dict) -> str:
    """Plain-text dataset x metric table for terminal output."""
    by_dataset: dict[str, list[dict]] = {}
    for item in report["items"]:
        by_dataset.setdefault(item.get("dataset") or "all", []).append(item)

    def row(name, items):
        total = len(items)
        fails = sum(1 for i in items if i["status"] == "target_not_found")
        ious = [i["iou"] for i in items if i.get("iou") is not None]
        ssims = [i["ssim"] for i in items if i.get("ssim") is not None]
        mean = lambda xs: f"{np.mean(xs):.3f}" if xs else "-"
        return (
            f"{name:<12} {total:>5} {fails:>6} {100 * fails / total:>6.1f}% "
            f"{mean(ious):>8} {mean(ssims):>8}"
        )

    lines = [f"{'dataset':<12} {'items':>5} {'fails':>6} {'rate':>7} {'iou':>8} {'ssim':>8}"]
    for name in sorted(by_dataset):
        lines.append(row(name, by_dataset[name]))
    if len(by_dataset) > 1:
        lines.append(row("overall", report["items"]))
    return "\n".join(lines)
