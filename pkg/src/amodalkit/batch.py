"""Manifest-driven batch runs with deterministic summaries."""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import synth
from .completion import CompletionResult, run_completion
from .config import PipelineConfig, parse_overrides
from .errors import AmodalkitError, BackendUnavailable
from .imaging import Image
from .providers import ProviderEndpoint, RemoteProviders, SceneProviders
from .providers.base import Providers


class ManifestError(AmodalkitError):
    """The batch manifest is structurally invalid."""


@dataclass(frozen=True)
class BatchJob:
    id: str
    image_path: Path
    query: str
    dataset: str | None = None


@dataclass(frozen=True)
class BatchManifest:
    jobs: tuple[BatchJob, ...]
    endpoint: ProviderEndpoint | None
    config: PipelineConfig


def load_manifest(path) -> BatchManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    jobs_raw = raw.get("jobs")
    if not isinstance(jobs_raw, list) or not jobs_raw:
        raise ManifestError("manifest needs a non-empty 'jobs' list")

    jobs = []
    seen = set()
    for i, j in enumerate(jobs_raw):
        try:
            job = BatchJob(
                id=str(j["id"]),
                image_path=(path.parent / j["image"]).resolve(),
                query=str(j["query"]),
                dataset=j.get("dataset"),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"job #{i} is malformed: {exc}") from exc
        if job.id in seen:
            raise ManifestError(f"duplicate job id {job.id!r}")
        seen.add(job.id)
        if not job.image_path.exists():
            raise ManifestError(f"job {job.id!r}: image {job.image_path} does not exist")
        jobs.append(job)

    endpoint = None
    if raw.get("endpoint"):
        e = raw["endpoint"]
        try:
            endpoint = ProviderEndpoint(
                base_url=e["base_url"],
                timeout=float(e.get("timeout", 10.0)),
                retries=int(e.get("retries", 0)),
                auth_token=e.get("auth_token"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad endpoint block: {exc}") from exc

    try:
        cfg = parse_overrides({k: str(v) for k, v in raw.get("config", {}).items()})
    except ValueError as exc:
        raise ManifestError(f"bad config block: {exc}") from exc

    return BatchManifest(jobs=tuple(jobs), endpoint=endpoint, config=cfg)


def providers_for_image(image_path: Path) -> Providers:
    """Mock-scene resolution: the image's directory must hold its scene.json."""
    scene_path = Path(image_path).parent / "scene.json"
    if not scene_path.exists():
        raise ManifestError(f"no scene.json next to {image_path} for mock providers")
    return SceneProviders(synth.load_scene(scene_path))


def write_result_dir(
    result: CompletionResult, cfg: PipelineConfig, out_dir, elapsed: float,
    dataset: str | None = None, debug: bool = False,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = result.trace_dict(cfg)
    if dataset is not None:
        trace["dataset"] = dataset
    (out / "trace.json").write_text(json.dumps(trace, indent=2, sort_keys=True) + "\n")
    # wall-clock data lives apart from the trace so traces stay byte-reproducible
    (out / "timings.json").write_text(json.dumps({"seconds": elapsed}) + "\n")
    if result.status == "completed":
        result.rgba.save_png(out / "result.png")
        result.amodal.save_png(out / "amodal.png")
        if debug:
            dbg = out / "debug"
            dbg.mkdir(exist_ok=True)
            for it in result.iterations:
                it.inpainted.save_png(dbg / f"iter_{it.index}_inpainted.png")
                it.amodal.save_png(dbg / f"iter_{it.index}_amodal.png")
                it.occ_mask_after.save_png(dbg / f"iter_{it.index}_occ.png")
            if result.prompt is not None:
                result.prompt.swapped_target.save_png(dbg / "swapped_target.png")
            if result.report is not None:
                from .occlusion import dump_report

                dump_report(result.report, dbg)


def run_one_job(job: BatchJob, manifest: BatchManifest, out_dir: Path) -> dict:
    entry = {"id": job.id, "query": job.query}
    if job.dataset is not None:
        entry["dataset"] = job.dataset
    started = time.monotonic()
    try:
        if manifest.endpoint is not None:
            providers = RemoteProviders(manifest.endpoint)
        else:
            providers = providers_for_image(job.image_path)
        img = Image.load_png(job.image_path)
        result = run_completion(img, job.query, providers, manifest.config)
        write_result_dir(
            result, manifest.config, out_dir / job.id,
            elapsed=time.monotonic() - started, dataset=job.dataset,
        )
        entry["status"] = result.status
        entry["termination"] = result.termination
    except BackendUnavailable as exc:
        entry["status"] = "backend_error"
        entry["error"] = str(exc)
    except AmodalkitError as exc:
        entry["status"] = "error"
        entry["error"] = str(exc)
    return entry


def run_batch(manifest: BatchManifest, out_dir, workers: int = 1) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(lambda j: run_one_job(j, manifest, out), manifest.jobs))
    else:
        entries = [run_one_job(j, manifest, out) for j in manifest.jobs]

    entries.sort(key=lambda e: e["id"])
    counts: dict[str, int] = {}
    for e in entries:
        counts[e["status"]] = counts.get(e["status"], 0) + 1
    summary = {"jobs": entries, "counts": dict(sorted(counts.items()))}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
