"""Service entry point."""
from __future__ import annotations

import argparse
import sys

from .app import serve
from .config import CACHE_ENV_VAR, DEFAULT_MODELS, BackendConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backend-service",
        description=(
            "Serve the amodal-completion provider protocol. Real-model mode wraps "
            "pretrained checkpoints; --stub answers deterministically with no weights. "
            f"Set {CACHE_ENV_VAR} to control where model weights are cached."
        ),
    )
    parser.add_argument("--port", type=int, default=8300)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--stub", action="store_true", help="canned responses, no model loads")
    parser.add_argument("--device", default="cuda", help="cuda, cuda:N or cpu")
    parser.add_argument(
        "--model", action="append", metavar="ROLE=IDENTIFIER", default=[],
        help=f"override a role's model (roles: {', '.join(sorted(DEFAULT_MODELS))})",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    models = dict(DEFAULT_MODELS)
    for pair in args.model:
        if "=" not in pair:
            print(f"error: --model expects ROLE=IDENTIFIER, got {pair!r}", file=sys.stderr)
            return 2
        role, ident = pair.split("=", 1)
        models[role.strip()] = ident.strip()
    try:
        config = BackendConfig(
            stub=args.stub, device=args.device, port=args.port, host=args.host, models=models
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    mode = "stub" if config.stub else f"real models on {config.device}"
    print(f"backend-service listening on {config.host}:{config.port} ({mode})", file=sys.stderr)
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
