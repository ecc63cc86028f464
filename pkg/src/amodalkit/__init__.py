"""Query-driven amodal appearance completion engine."""

from .completion import CompletionResult, run_completion
from .config import PipelineConfig
from .imaging import BackgroundFill, Image, RgbaImage
from .masks import BinaryMask, StructuringElement

__version__ = "0.1.0"

__all__ = [
    "BackgroundFill",
    "BinaryMask",
    "CompletionResult",
    "Image",
    "PipelineConfig",
    "RgbaImage",
    "StructuringElement",
    "run_completion",
    "__version__",
]
