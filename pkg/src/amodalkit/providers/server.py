"""FastAPI app exposing any in-process Providers over the wire protocol."""
from __future__ import annotations

import threading
import time

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import wire
from .base import Providers, TagSet


def build_app(providers: Providers) -> FastAPI:
    app = FastAPI(title="amodalkit provider protocol", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(ValueError)
    async def precondition(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def server_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/v1/ground_segment", response_model=wire.GroundSegmentResponse,
              response_model_exclude_none=True)
    def ground_segment(req: wire.GroundSegmentRequest):
        mask = providers.ground_segment(wire.decode_image(req.image_png_b64), req.query)
        if mask is None:
            return wire.GroundSegmentResponse(found=False)
        return wire.GroundSegmentResponse(found=True, mask_png_b64=wire.encode_mask(mask))

    @app.post("/v1/tags", response_model=wire.TagsResponse)
    def tags(req: wire.TagsRequest):
        result = providers.tag_scene(wire.decode_image(req.image_png_b64))
        return wire.TagsResponse(tags=list(result))

    @app.post("/v1/detect_segments", response_model=wire.DetectSegmentsResponse)
    def detect_segments(req: wire.DetectSegmentsRequest):
        segs = providers.detect_segments(
            wire.decode_image(req.image_png_b64), TagSet.from_iterable(req.tags)
        )
        return wire.DetectSegmentsResponse(
            segments=[
                wire.WireSegment(label=s.label, mask_png_b64=wire.encode_mask(s.mask))
                for s in segs
            ]
        )

    @app.post("/v1/occlusion_order", response_model=wire.OcclusionOrderResponse)
    def occlusion_order(req: wire.OcclusionOrderRequest):
        rel = providers.occlusion_order(
            wire.decode_image(req.image_png_b64),
            wire.decode_mask(req.target_mask_png_b64),
            wire.decode_mask(req.candidate_mask_png_b64),
        )
        return wire.OcclusionOrderResponse(occludes_target=rel.occludes_target)

    @app.post("/v1/score", response_model=wire.ScoreResponse)
    def score(req: wire.ScoreRequest):
        result = providers.score_text_image(wire.decode_image(req.image_png_b64), req.text)
        return wire.ScoreResponse(score=result.value)

    @app.post("/v1/inpaint", response_model=wire.InpaintResponse)
    def inpaint(req: wire.InpaintRequest):
        out = providers.inpaint(
            wire.decode_image(req.image_png_b64),
            wire.decode_mask(req.mask_png_b64),
            req.prompt,
            seed=req.seed or 0,
        )
        return wire.InpaintResponse(image_png_b64=wire.encode_image(out))

    return app


def serve(providers: Providers, host: str = "127.0.0.1", port: int = 8200) -> None:
    """Blocking server, for the mock-serve CLI command."""
    uvicorn.run(build_app(providers), host=host, port=port, log_level="warning")


class ServerThread:
    """Background uvicorn server for tests and wire-equivalence checks."""

    def __init__(self, providers: Providers, host: str = "127.0.0.1", port: int = 8200):
        config = uvicorn.Config(
            build_app(providers), host=host, port=port, log_level="warning"
        )
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.host = host
        self.port = port

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("provider server failed to start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)
