"""Operator surface.

Exit codes are stable API: 0 success, 1 backend failure, 2 usage or manifest
error, 3 target not found.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import evaluation, synth
from .batch import (
    ManifestError,
    load_manifest,
    providers_for_image,
    run_batch,
    write_result_dir,
)
from .completion import run_completion
from .config import PipelineConfig, load_config_file, parse_overrides
from .errors import AmodalkitError, BackendUnavailable, GenerationError
from .imaging import Image
from .providers import ProviderEndpoint, RemoteProviders, SceneProviders
from .synth import GenSpec

EXIT_OK = 0
EXIT_BACKEND = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3


def _build_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = load_config_file(args.config, cfg)
    overrides = {}
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key] = value
    if getattr(args, "seed", None) is not None:
        overrides["inpaint_seed"] = str(args.seed)
    return parse_overrides(overrides, cfg)


def _providers_from_args(args):
    if args.endpoint and args.mock_scene:
        raise ValueError("--endpoint and --mock-scene are mutually exclusive")
    if args.endpoint:
        return RemoteProviders(
            ProviderEndpoint(
                base_url=args.endpoint.rstrip("/"),
                timeout=args.timeout,
                retries=args.retries,
                auth_token=args.auth_token,
            )
        )
    if args.mock_scene:
        scene_path = Path(args.mock_scene) / "scene.json"
        if not scene_path.exists():
            raise ValueError(f"{args.mock_scene} holds no scene.json")
        return SceneProviders(synth.load_scene(scene_path))
    return providers_for_image(Path(args.image))


def cmd_complete(args) -> int:
    try:
        cfg = _build_config(args)
        providers = _providers_from_args(args)
    except (ValueError, ManifestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        img = Image.load_png(args.image)
    except OSError as exc:
        print(f"error: cannot read image: {exc}", file=sys.stderr)
        return EXIT_USAGE

    started = time.monotonic()
    try:
        result = run_completion(img, args.query, providers, cfg)
    except BackendUnavailable as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    write_result_dir(
        result, cfg, args.out, elapsed=time.monotonic() - started, debug=args.debug
    )
    if result.status == "target_not_found":
        print(f"query {args.query!r} grounded no object", file=sys.stderr)
        return EXIT_NOT_FOUND
    print(f"completed: {Path(args.out) / 'result.png'}")
    return EXIT_OK


def cmd_batch(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary = run_batch(manifest, args.out_dir, workers=args.workers)
    print(json.dumps(summary["counts"]))
    return EXIT_OK


def cmd_synth_gen(args) -> int:
    spec = GenSpec(
        canvas=(args.canvas, args.canvas),
        n_shapes=(args.min_shapes, args.max_shapes),
        allow_boundary=args.boundary,
    )
    out = Path(args.out_dir)
    try:
        for seed in range(args.seed, args.seed + args.count):
            scene = synth.generate(seed, spec)
            synth.write_bundle(scene, out / f"scene_{seed:04d}")
    except GenerationError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {args.count} scene bundle(s) under {out}")
    return EXIT_OK


def cmd_eval_run(args) -> int:
    scorer = None
    if args.endpoint:
        scorer = RemoteProviders(ProviderEndpoint(base_url=args.endpoint.rstrip("/")))
    try:
        report = evaluation.build_report(args.results_dir, args.truth_dir, scorer=scorer)
    except (ValueError, OSError, AmodalkitError) as exc:
        print(f"eval error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(evaluation.render_table(report))
    return EXIT_OK


def cmd_eval_kappa(args) -> int:
    try:
        table = evaluation.ratings_from_csv(args.ratings)
        kappa = evaluation.fleiss_kappa(table)
    except (ValueError, OSError, evaluation.DegenerateAgreement) as exc:
        print(f"kappa error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{kappa:.3f}")
    return EXIT_OK


def cmd_mock_serve(args) -> int:
    from .providers.server import serve

    scene_path = Path(args.scene_dir) / "scene.json"
    if not scene_path.exists():
        print(f"error: {args.scene_dir} holds no scene.json", file=sys.stderr)
        return EXIT_USAGE
    providers = SceneProviders(synth.load_scene(scene_path))
    print(f"serving scene {scene_path} on port {args.port}", file=sys.stderr)
    serve(providers, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amodalkit",
        description="Reconstruct the full appearance of occluded objects from text queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complete", help="run one completion")
    p.add_argument("--image", required=True, help="input RGB PNG")
    p.add_argument("--query", required=True, help="text query naming the target")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    p.add_argument("--endpoint", help="provider backend base URL")
    p.add_argument("--mock-scene", help="scene bundle directory for oracle mocks")
    p.add_argument("--seed", type=int, help="inpainting seed")
    p.add_argument("--timeout", type=float, default=10.0, help="endpoint timeout seconds")
    p.add_argument("--retries", type=int, default=0, help="endpoint retry count")
    p.add_argument("--auth-token", help="bearer token for the endpoint")
    p.add_argument("--debug", action="store_true", help="write per-iteration PNGs")
    p.set_defaults(fn=cmd_complete)

    p = sub.add_parser("batch", help="run a manifest of jobs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_batch)

    p_synth = sub.add_parser("synth", help="synthetic scene tools")
    synth_sub = p_synth.add_subparsers(dest="synth_command", required=True)
    p = synth_sub.add_parser("gen", help="generate scene bundles")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--boundary", action="store_true", help="one shape crosses a canvas edge")
    p.add_argument("--canvas", type=int, default=256)
    p.add_argument("--min-shapes", type=int, default=3)
    p.add_argument("--max-shapes", type=int, default=5)
    p.set_defaults(fn=cmd_synth_gen)

    p_eval = sub.add_parser("eval", help="evaluation tools")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    p = eval_sub.add_parser("run", help="score results against scene truth")
    p.add_argument("--results-dir", required=True)
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--report", required=True, help="report JSON path")
    p.add_argument("--endpoint", help="scoring backend for text/image alignment")
    p.set_defaults(fn=cmd_eval_run)
    p = eval_sub.add_parser("kappa", help="Fleiss' kappa from a ratings CSV")
    p.add_argument("--ratings", required=True)
    p.set_defaults(fn=cmd_eval_kappa)

    p = sub.add_parser("mock-serve", help="serve scene-backed mock providers over HTTP")
    p.add_argument("--scene-dir", required=True)
    p.add_argument("--port", type=int, default=8200)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_mock_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
