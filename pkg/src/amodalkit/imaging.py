"""RGB/RGBA image values, compositing, the alpha transition map, and canvas padding."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import DimensionMismatch
from .masks import BinaryMask


def _as_readonly_u8(arr: np.ndarray, channels: int) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.uint8)
    if out.ndim != 3 or out.shape[2] != channels:
        raise ValueError(f"expected (h, w, {channels}) uint8 buffer, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Image:
    """8-bit RGB raster, row-major, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_readonly_u8(self.pixels, 3))

    @classmethod
    def from_array(cls, arr) -> "Image":
        return cls(np.asarray(arr))

    @classmethod
    def solid(cls, width: int, height: int, rgb: tuple[int, int, int]) -> "Image":
        buf = np.empty((height, width, 3), dtype=np.uint8)
        buf[:] = rgb
        return cls(buf)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def to_png_bytes(self) -> bytes:
        img = PILImage.fromarray(self.pixels, mode="RGB")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "Image":
        img = PILImage.open(io.BytesIO(data)).convert("RGB")
        return cls(np.asarray(img))

    def save_png(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_png_bytes())

    @classmethod
    def load_png(cls, path) -> "Image":
        with open(path, "rb") as f:
            return cls.from_png_bytes(f.read())


@dataclass(frozen=True)
class RgbaImage:
    """8-bit RGBA raster; in pipeline output the alpha channel is binary (0 or 255)."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_readonly_u8(self.pixels, 4))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RgbaImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def to_png_bytes(self) -> bytes:
        img = PILImage.fromarray(self.pixels, mode="RGBA")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RgbaImage":
        img = PILImage.open(io.BytesIO(data)).convert("RGBA")
        return cls(np.asarray(img))

    def save_png(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_png_bytes())

    @classmethod
    def load_png(cls, path) -> "RgbaImage":
        with open(path, "rb") as f:
            return cls.from_png_bytes(f.read())


@dataclass(frozen=True)
class AlphaMap:
    """Per-pixel blend weights in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"alpha map must be 2-D, got shape {vals.shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("alpha values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class BackgroundFill:
    """Clean background used to isolate the target: a solid color or a full-canvas image."""

    mode: str
    color: tuple[int, int, int] | None = None
    image: Image | None = None

    @classmethod
    def solid(cls, rgb: tuple[int, int, int]) -> "BackgroundFill":
        r, g, b = rgb
        return cls(mode="solid", color=(int(r), int(g), int(b)))

    @classmethod
    def from_image(cls, img: Image) -> "BackgroundFill":
        return cls(mode="image", image=img)

    @property
    def is_solid(self) -> bool:
        return self.mode == "solid"

    def render(self, width: int, height: int) -> Image:
        if self.mode == "solid":
            return Image.solid(width, height, self.color)
        if self.image.shape != (height, width):
            raise DimensionMismatch("background image", (height, width), self.image.shape)
        return self.image


def composite(fg: Image, m: BinaryMask, bg: BackgroundFill) -> Image:
    """Foreground where the mask is set, background fill elsewhere."""
    if fg.shape != m.shape:
        raise DimensionMismatch("composite", fg.shape, m.shape)
    back = bg.render(fg.width, fg.height)
    out = np.where(m.bits[:, :, None], fg.pixels, back.pixels)
    return Image(out)


def alpha_transition(visible: BinaryMask, width_px: int) -> AlphaMap:
    """Blend weights that ramp from 1 deep inside the mask down to 0 at its boundary.

    The weight is min(d / width_px, 1) where d is the Euclidean distance to the
    in-canvas complement of the mask; pixels outside the mask get 0.  The canvas
    border is not treated as complement, so a full mask maps to all ones.
    """
    if width_px < 1:
        raise ValueError(f"transition width must be >= 1, got {width_px}")
    pad = width_px + 1
    padded = np.pad(visible.bits, pad, constant_values=True)
    dist = ndimage.distance_transform_edt(padded)[pad:-pad, pad:-pad]
    vals = np.clip(dist / float(width_px), 0.0, 1.0)
    vals[~visible.bits] = 0.0
    return AlphaMap(vals)


def alpha_blend(inpainted: Image, original: Image, a: AlphaMap) -> Image:
    """Per-channel convex combination a*inpainted + (1-a)*original, rounded half-up."""
    if inpainted.shape != original.shape:
        raise DimensionMismatch("alpha_blend images", inpainted.shape, original.shape)
    if inpainted.shape != a.shape:
        raise DimensionMismatch("alpha_blend alpha", inpainted.shape, a.shape)
    w = a.values[:, :, None]
    mixed = w * inpainted.pixels.astype(np.float64) + (1.0 - w) * original.pixels.astype(np.float64)
    out = np.floor(mixed + 0.5)
    # exact passthrough where the weight is saturated, so blending never perturbs
    # preserved source pixels by float noise
    ones = a.values == 1.0
    zeros = a.values == 0.0
    out[ones] = inpainted.pixels[ones]
    out[zeros] = original.pixels[zeros]
    return Image(np.clip(out, 0, 255).astype(np.uint8))


def assemble_rgba(blend: Image, amodal: BinaryMask) -> RgbaImage:
    """RGBA layer: RGB from blend inside the amodal mask, zero outside; binary alpha."""
    if blend.shape != amodal.shape:
        raise DimensionMismatch("assemble_rgba", blend.shape, amodal.shape)
    out = np.zeros((blend.height, blend.width, 4), dtype=np.uint8)
    out[:, :, :3] = np.where(amodal.bits[:, :, None], blend.pixels, 0)
    out[:, :, 3] = np.where(amodal.bits, 255, 0)
    return RgbaImage(out)


@dataclass(frozen=True)
class Margins:
    """Per-edge padding in pixels."""

    top: int = 0
    bottom: int = 0
    left: int = 0
    right: int = 0

    def __post_init__(self):
        for name in ("top", "bottom", "left", "right"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} margin must be >= 0")

    def any(self) -> bool:
        return bool(self.top or self.bottom or self.left or self.right)


def pad_canvas(img: Image, margins: Margins, fill: BackgroundFill) -> tuple[Image, tuple[int, int]]:
    """Enlarge the canvas, placing the original at offset (left, top).

    Image-mode fills must already match the enlarged canvas.
    """
    if not margins.any():
        return img, (0, 0)
    new_w = img.width + margins.left + margins.right
    new_h = img.height + margins.top + margins.bottom
    base = fill.render(new_w, new_h).pixels.copy()
    base[margins.top : margins.top + img.height, margins.left : margins.left + img.width] = img.pixels
    return Image(base), (margins.left, margins.top)


def crop_canvas(img: Image, offset: tuple[int, int], dims: tuple[int, int]) -> Image:
    """Inverse of pad_canvas: cut the (width, height) window at offset."""
    dx, dy = offset
    w, h = dims
    return Image(img.pixels[dy : dy + h, dx : dx + w])
