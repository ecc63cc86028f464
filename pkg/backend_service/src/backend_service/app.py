"""FastAPI application implementing the provider protocol."""
from __future__ import annotations

import threading
import time

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import protocol, stubs
from .config import BackendConfig
from .models import ModelRegistry, RoleUnavailable


def build_app(config: BackendConfig | None = None) -> FastAPI:
    config = config or BackendConfig(stub=True)
    app = FastAPI(title="amodal completion backend", docs_url=None, redoc_url=None)
    registry = None if config.stub else ModelRegistry(config)

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(RoleUnavailable)
    async def role_unavailable(request: Request, exc: RoleUnavailable):
        return JSONResponse(status_code=503, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def server_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/v1/ground_segment", response_model=protocol.GroundSegmentResponse,
              response_model_exclude_none=True)
    def ground_segment(req: protocol.GroundSegmentRequest):
        image = protocol.decode_image(req.image_png_b64)
        if config.stub:
            mask = stubs.ground_segment(image, req.query)
        else:
            mask = registry.ground_segment(image, req.query)
        if mask is None:
            return protocol.GroundSegmentResponse(found=False)
        return protocol.GroundSegmentResponse(found=True, mask_png_b64=protocol.encode_mask(mask))

    @app.post("/v1/tags", response_model=protocol.TagsResponse)
    def tags(req: protocol.TagsRequest):
        image = protocol.decode_image(req.image_png_b64)
        result = stubs.tags(image) if config.stub else registry.tags(image)
        return protocol.TagsResponse(tags=result)

    @app.post("/v1/detect_segments", response_model=protocol.DetectSegmentsResponse)
    def detect_segments(req: protocol.DetectSegmentsRequest):
        image = protocol.decode_image(req.image_png_b64)
        if config.stub:
            found = stubs.detect_segments(image, req.tags)
        else:
            found = registry.detect_segments(image, req.tags)
        return protocol.DetectSegmentsResponse(
            segments=[
                protocol.SegmentOut(label=label, mask_png_b64=protocol.encode_mask(mask))
                for label, mask in found
            ]
        )

    @app.post("/v1/occlusion_order", response_model=protocol.OcclusionOrderResponse)
    def occlusion_order(req: protocol.OcclusionOrderRequest):
        image = protocol.decode_image(req.image_png_b64)
        target = protocol.decode_mask(req.target_mask_png_b64)
        candidate = protocol.decode_mask(req.candidate_mask_png_b64)
        if config.stub:
            occludes = stubs.occlusion_order(image, target, candidate)
        else:
            occludes = registry.occlusion_order(image, target, candidate)
        return protocol.OcclusionOrderResponse(occludes_target=occludes)

    @app.post("/v1/score", response_model=protocol.ScoreResponse)
    def score(req: protocol.ScoreRequest):
        image = protocol.decode_image(req.image_png_b64)
        value = stubs.score(image, req.text) if config.stub else registry.score(image, req.text)
        return protocol.ScoreResponse(score=value)

    @app.post("/v1/inpaint", response_model=protocol.InpaintResponse)
    def inpaint(req: protocol.InpaintRequest):
        image = protocol.decode_image(req.image_png_b64)
        mask = protocol.decode_mask(req.mask_png_b64)
        if config.stub:
            out = stubs.inpaint(image, mask, req.prompt, req.seed)
        else:
            out = registry.inpaint(image, mask, req.prompt, req.seed)
        return protocol.InpaintResponse(image_png_b64=protocol.encode_image(out))

    return app


def serve(config: BackendConfig) -> None:
    uvicorn.run(build_app(config), host=config.host, port=config.port, log_level="warning")


class ServerThread:
    """Background server for tests."""

    def __init__(self, config: BackendConfig):
        self.config = config
        uv_config = uvicorn.Config(
            build_app(config), host=config.host, port=config.port, log_level="warning"
        )
        self.server = uvicorn.Server(uv_config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://{self.config.host}:{self.config.port}"

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("backend server failed to start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


def stub_server_thread(port: int = 8300, host: str = "127.0.0.1") -> ServerThread:
    """Weight-free stub server; used by the engine's conformance gate."""
    return ServerThread(BackendConfig(stub=True, device="cpu", port=port, host=host))
