"""Pipeline configuration: every tunable constant lives here.

Configs round-trip through a flat ``key = value`` text file so runs are
scriptable and traces are diff-friendly.  Command-line flags override file
values, which override the defaults below.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .imaging import BackgroundFill, Image

DEFAULT_BACKGROUND_RGB = (127, 127, 127)


@dataclass(frozen=True)
class PipelineConfig:
    # iterative inpainting (termination threshold is a canvas fraction so it
    # scales with image size)
    epsilon_frac: float = 0.001
    max_iterations: int = 3
    inpaint_seed: int = 0

    # morphology
    morph_radius: int = 2
    boundary_radius: int = 8
    band_width: int = 8
    max_boundary_rounds: int = 4
    connectivity: str = "eight"

    # scene decomposition
    min_bg_area_frac: float = 0.005
    self_overlap_iou: float = 0.9

    # blending / output
    transition_width: int = 7
    keep_expanded_canvas: bool = True
    amodal_tolerance: int = 12

    # prompting
    prompt_template: str = "a complete photo of {descriptor}"

    # providers
    occlusion_parallelism: int = 1

    background: BackgroundFill = field(
        default_factory=lambda: BackgroundFill.solid(DEFAULT_BACKGROUND_RGB)
    )

    def __post_init__(self):
        if not (0.0 < self.epsilon_frac < 1.0):
            raise ValueError(f"epsilon_frac must be in (0, 1), got {self.epsilon_frac}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("morph_radius", "boundary_radius", "band_width", "transition_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.connectivity not in ("four", "eight"):
            raise ValueError(f"connectivity must be four or eight, got {self.connectivity!r}")
        if self.occlusion_parallelism < 1:
            raise ValueError("occlusion_parallelism must be >= 1")

    def replace(self, **kwargs) -> "PipelineConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            if f.name == "background":
                continue
            d[f.name] = getattr(self, f.name)
        bg = self.background
        d["background"] = (
            "{},{},{}".format(*bg.color) if bg.is_solid else "<image>"
        )
        return d


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

_FIELD_PARSERS = {
    "epsilon_frac": float,
    "min_bg_area_frac": float,
    "self_overlap_iou": float,
    "max_iterations": int,
    "inpaint_seed": int,
    "morph_radius": int,
    "boundary_radius": int,
    "band_width": int,
    "max_boundary_rounds": int,
    "transition_width": int,
    "amodal_tolerance": int,
    "occlusion_parallelism": int,
    "connectivity": str,
    "prompt_template": str,
}


def _parse_background(value: str) -> BackgroundFill:
    value = value.strip()
    if "," in value:
        parts = [int(p) for p in value.split(",")]
        if len(parts) != 3:
            raise ValueError(f"background color needs 3 components, got {value!r}")
        return BackgroundFill.solid(tuple(parts))
    return BackgroundFill.from_image(Image.load_png(value))


def parse_overrides(pairs: dict[str, str], base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply string key/value overrides (from file or flags) onto a config."""
    cfg = base or PipelineConfig()
    updates = {}
    for key, raw in pairs.items():
        key = key.strip()
        raw = raw.strip()
        if key == "background":
            updates[key] = _parse_background(raw)
        elif key == "keep_expanded_canvas":
            try:
                updates[key] = _BOOL_WORDS[raw.lower()]
            except KeyError:
                raise ValueError(f"bad boolean {raw!r} for {key}") from None
        elif key in _FIELD_PARSERS:
            updates[key] = _FIELD_PARSERS[key](raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return cfg.replace(**updates)


def load_config_file(path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read a flat key = value config file; '#' starts a comment."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        pairs[key] = value
    return parse_overrides(pairs, base)
