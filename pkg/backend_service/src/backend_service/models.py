"""Real-model adapters, loaded lazily per role.

Only the roles backed by pip-installable stacks (CLIP scoring via
transformers, Stable Diffusion inpainting via diffusers) have working load
paths; grounding, tagging, detection/segmentation and occlusion ordering wrap
research checkpoints that must be vendored by the operator, and their
adapters explain what is missing.  Any load or inference failure surfaces as
RoleUnavailable, which the app maps to a 503 on that route while the other
routes keep serving.
"""
from __future__ import annotations

import os
import threading

import numpy as np

from .config import CACHE_ENV_VAR, BackendConfig


class RoleUnavailable(Exception):
    """The model behind one protocol role cannot serve."""


def _cache_env(config: BackendConfig) -> None:
    cache = config.cache_dir
    if cache:
        os.environ.setdefault("HF_HOME", cache)
        os.environ.setdefault("TORCH_HOME", cache)


class ModelRegistry:
    """Lazy per-role model loading with per-model call serialization."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self._loaded: dict[str, object] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, role: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(role, threading.Lock())

    def _get(self, role: str, loader):
        with self._lock(role):
            if role not in self._loaded:
                _cache_env(self.config)
                self._loaded[role] = loader()
            return self._loaded[role]

    # --- scoring: CLIP ------------------------------------------------------

    def _load_scoring(self):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RoleUnavailable(f"scoring needs torch+transformers: {exc}") from exc
        name = self.config.models["scoring"]
        # the configured identifier is the research alias for the HF release
        repo = "openai/clip-vit-base-patch32" if name == "ViT-B/32" else name
        try:
            model = CLIPModel.from_pretrained(repo)
            processor = CLIPProcessor.from_pretrained(repo)
        except Exception as exc:
            raise RoleUnavailable(f"cannot load CLIP weights {repo!r}: {exc}") from exc
        if self.config.device != "cpu":
            try:
                model = model.to(self.config.device)
            except Exception as exc:
                raise RoleUnavailable(f"cannot move CLIP to {self.config.device}: {exc}") from exc
        model.eval()
        return model, processor

    def score(self, image: np.ndarray, text: str) -> float:
        import torch
        from PIL import Image

        model, processor = self._get("scoring", self._load_scoring)
        with self._lock("scoring-call"):
            inputs = processor(
                text=[text], images=Image.fromarray(image), return_tensors="pt", padding=True
            )
            if self.config.device != "cpu":
                inputs = {k: v.to(self.config.device) for k, v in inputs.items()}
            with torch.no_grad():
                out = model(**inputs)
            return float(out.logits_per_image[0, 0].item())

    # --- inpainting: Stable Diffusion v2 -------------------------------------

    def _load_inpainting(self):
        try:
            import torch  # noqa: F401
            from diffusers import StableDiffusionInpaintPipeline
        except ImportError as exc:
            raise RoleUnavailable(f"inpainting needs torch+diffusers: {exc}") from exc
        name = self.config.models["inpainting"]
        try:
            pipe = StableDiffusionInpaintPipeline.from_pretrained(name)
            if self.config.device != "cpu":
                pipe = pipe.to(self.config.device)
        except Exception as exc:
            raise RoleUnavailable(f"cannot load inpainting weights {name!r}: {exc}") from exc
        return pipe

    def inpaint(self, image: np.ndarray, mask: np.ndarray, prompt: str, seed: int | None) -> np.ndarray:
        import torch
        from PIL import Image

        pipe = self._get("inpainting", self._load_inpainting)
        h, w = image.shape[:2]
        with self._lock("inpainting-call"):
            generator = torch.Generator(device="cpu").manual_seed(seed or 0)
            out = pipe(
                prompt=prompt,
                image=Image.fromarray(image).resize((512, 512)),
                mask_image=Image.fromarray(mask.astype(np.uint8) * 255).resize((512, 512)),
                generator=generator,
            ).images[0]
        restored = np.asarray(out.resize((w, h)))
        # the engine restores outside-mask pixels too, but honor the contract here
        result = image.copy()
        result[mask] = restored[mask]
        return result

    # --- research checkpoints without a packaged load path ----------------------

    def ground_segment(self, image: np.ndarray, query: str):
        raise RoleUnavailable(
            f"grounding model {self.config.models['grounding']!r} requires the LISA "
            "checkpoint and its repository on PYTHONPATH; vendor it and extend "
            "ModelRegistry.ground_segment"
        )

    def tags(self, image: np.ndarray) -> list[str]:
        raise RoleUnavailable(
            f"tagging model {self.config.models['tagging']!r} requires the RAM++ "
            "checkpoint (recognize-anything); vendor it and extend ModelRegistry.tags"
        )

    def detect_segments(self, image: np.ndarray, tag_list: list[str]):
        raise RoleUnavailable(
            f"detection stack {self.config.models['detection']!r} + "
            f"{self.config.models['segmentation']!r} requires GroundingDINO and SAM "
            "checkpoints; vendor them and extend ModelRegistry.detect_segments"
        )

    def occlusion_order(self, image, target_mask, candidate_mask) -> bool:
        raise RoleUnavailable(
            f"occlusion model {self.config.models['occlusion']!r} requires the "
            "InstaOrder checkpoint; vendor it and extend ModelRegistry.occlusion_order"
        )
