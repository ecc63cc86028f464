"""Service configuration: one pretrained model identifier per protocol role."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

CACHE_ENV_VAR = "BACKEND_SERVICE_CACHE"

ROLES = ("grounding", "tagging", "detection", "segmentation", "occlusion", "scoring", "inpainting")

DEFAULT_MODELS = {
    "grounding": "LISA-13B-llama2-v1",
    "tagging": "ram_plus_swin_large_14m",
    "detection": "groundingdino_swint_ogc",
    "segmentation": "sam_vit_h_4b8939",
    "occlusion": "InstaOrder_InstaOrderNet_od",
    "scoring": "ViT-B/32",
    "inpainting": "stabilityai/stable-diffusion-2-inpainting",
}


@dataclass(frozen=True)
class BackendConfig:
    stub: bool = False
    device: str = "cuda"
    port: int = 8300
    host: str = "127.0.0.1"
    models: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_MODELS))

    def __post_init__(self):
        unknown = set(self.models) - set(ROLES)
        if unknown:
            raise ValueError(f"unknown model roles: {sorted(unknown)}")

    @property
    def cache_dir(self) -> str | None:
        return os.environ.get(CACHE_ENV_VAR)
