"""Binary mask values and the set/morphological algebra the pipeline is written in.

Masks are dense per-pixel boolean grids with value semantics: every operation
returns a new mask and never mutates its inputs, so masks are safe to share
across threads.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import DimensionMismatch

EDGES = ("top", "bottom", "left", "right")
Edge = Literal["top", "bottom", "left", "right"]
Connectivity = Literal["four", "eight"]


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=bool)
    if out.ndim != 2:
        raise ValueError(f"mask array must be 2-D, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel membership set, row-major, shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _as_readonly(self.bits))

    @classmethod
    def from_array(cls, arr) -> "BinaryMask":
        return cls(np.asarray(arr))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )

    def __hash__(self):
        return hash((self.bits.shape, self.bits.tobytes()))

    def to_png_bytes(self) -> bytes:
        """8-bit single-channel PNG, 0 = unset, 255 = set."""
        img = PILImage.fromarray(self.bits.astype(np.uint8) * 255, mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "BinaryMask":
        img = PILImage.open(io.BytesIO(data)).convert("L")
        return cls(np.asarray(img) > 127)

    def save_png(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_png_bytes())

    @classmethod
    def load_png(cls, path) -> "BinaryMask":
        with open(path, "rb") as f:
            return cls.from_png_bytes(f.read())


@dataclass(frozen=True)
class StructuringElement:
    """Neighborhood shape for erosion/dilation."""

    shape: Literal["square", "disk"] = "square"
    radius: int = 1

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError(f"structuring element radius must be >= 1, got {self.radius}")
        if self.shape not in ("square", "disk"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")

    def footprint(self) -> np.ndarray:
        r = self.radius
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
        return (dx * dx + dy * dy) <= r * r


@dataclass(frozen=True)
class EdgeSet:
    """Subset of the four canvas edges."""

    edges: frozenset[str]

    def __post_init__(self):
        bad = set(self.edges) - set(EDGES)
        if bad:
            raise ValueError(f"unknown edges {sorted(bad)}")
        object.__setattr__(self, "edges", frozenset(self.edges))

    @classmethod
    def of(cls, *edges: str) -> "EdgeSet":
        return cls(frozenset(edges))

    def __contains__(self, edge: str) -> bool:
        return edge in self.edges

    def __iter__(self):
        return iter(sorted(self.edges, key=EDGES.index))

    def __len__(self):
        return len(self.edges)

    def __bool__(self):
        return bool(self.edges)


def _require_same_shape(a: BinaryMask, b: BinaryMask, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(what, a.shape, b.shape)


def union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    _require_same_shape(a, b, "union")
    return BinaryMask(a.bits | b.bits)


def intersect(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    _require_same_shape(a, b, "intersect")
    return BinaryMask(a.bits & b.bits)


def subtract(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    _require_same_shape(a, b, "subtract")
    return BinaryMask(a.bits & ~b.bits)


_BOOLEAN_OPS = {"union": union, "intersect": intersect, "subtract": subtract}


def boolean(op: str, a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixel-wise set operation; op is one of union/intersect/subtract."""
    try:
        fn = _BOOLEAN_OPS[op]
    except KeyError:
        raise ValueError(f"unknown boolean op {op!r}") from None
    return fn(a, b)


def erode(m: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Keep a pixel iff its whole neighborhood is set; offsets outside the canvas count as unset."""
    out = ndimage.binary_erosion(m.bits, structure=se.footprint(), border_value=0)
    return BinaryMask(out)


def dilate(m: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Set a pixel iff any in-canvas neighbor is set; growth clips to the canvas."""
    out = ndimage.binary_dilation(m.bits, structure=se.footprint(), border_value=0)
    return BinaryMask(out)


def _padded_morph(m: BinaryMask, se: StructuringElement, first, second) -> BinaryMask:
    # run the composition on a virtually enlarged canvas so the canvas border
    # does not act as background between the two steps
    r = se.radius
    fp = se.footprint()
    padded = np.pad(m.bits, r, constant_values=False)
    out = second(first(padded, structure=fp, border_value=0), structure=fp, border_value=0)
    return BinaryMask(out[r:-r, r:-r])


def open_mask(m: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Morphological opening: erosion then dilation, result is a subset of m."""
    return _padded_morph(m, se, ndimage.binary_erosion, ndimage.binary_dilation)


def close_mask(m: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Morphological closing: dilation then erosion, result is a superset of m."""
    return _padded_morph(m, se, ndimage.binary_dilation, ndimage.binary_erosion)


_CONNECTIVITY_STRUCTURE = {
    "four": np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    "eight": np.ones((3, 3), dtype=bool),
}


def connected_components(m: BinaryMask, connectivity: Connectivity = "eight") -> list[BinaryMask]:
    """Maximal connected regions, largest first; ties by first set pixel in row-major order."""
    structure = _CONNECTIVITY_STRUCTURE[connectivity]
    labels, count = ndimage.label(m.bits, structure=structure)
    if count == 0:
        return []
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=count + 1)
    # first row-major index per label, for the deterministic tie-break
    first = np.full(count + 1, flat.size, dtype=np.int64)
    nonzero = np.flatnonzero(flat)
    np.minimum.at(first, flat[nonzero], nonzero)
    order = sorted(range(1, count + 1), key=lambda lbl: (-areas[lbl], first[lbl]))
    return [BinaryMask(labels == lbl) for lbl in order]


def l1_diff(a: BinaryMask, b: BinaryMask) -> int:
    """Number of pixels where the two masks disagree."""
    _require_same_shape(a, b, "l1_diff")
    return int(np.count_nonzero(a.bits != b.bits))


def boundary_contacts(m: BinaryMask) -> EdgeSet:
    """Edges of the canvas touched by at least one set pixel."""
    bits = m.bits
    touched = set()
    if bits[0, :].any():
        touched.add("top")
    if bits[-1, :].any():
        touched.add("bottom")
    if bits[:, 0].any():
        touched.add("left")
    if bits[:, -1].any():
        touched.add("right")
    return EdgeSet(frozenset(touched))


def edge_band(width_px: int, dims: tuple[int, int], edge: Edge) -> BinaryMask:
    """Strip of width_px pixels along one canvas edge; dims is (width, height)."""
    w, h = dims
    if width_px < 1:
        raise ValueError(f"band width must be >= 1, got {width_px}")
    if width_px >= min(w, h):
        raise ValueError(f"band width {width_px} does not fit canvas {w}x{h}")
    bits = np.zeros((h, w), dtype=bool)
    if edge == "top":
        bits[:width_px, :] = True
    elif edge == "bottom":
        bits[h - width_px :, :] = True
    elif edge == "left":
        bits[:, :width_px] = True
    elif edge == "right":
        bits[:, w - width_px :] = True
    else:
        raise ValueError(f"unknown edge {edge!r}")
    return BinaryMask(bits)


@dataclass(frozen=True)
class MaskMetrics:
    area_a: int
    area_b: int
    intersection: int
    iou: float


def metrics(a: BinaryMask, b: BinaryMask) -> MaskMetrics:
    """Exact overlap counts; IoU of two empty masks is 1.0 by convention."""
    _require_same_shape(a, b, "metrics")
    inter = int(np.count_nonzero(a.bits & b.bits))
    un = int(np.count_nonzero(a.bits | b.bits))
    iou = 1.0 if un == 0 else inter / un
    return MaskMetrics(area_a=a.area, area_b=b.area, intersection=inter, iou=iou)


def union_all(masks: Iterable[BinaryMask], width: int, height: int) -> BinaryMask:
    acc = np.zeros((height, width), dtype=bool)
    for m in masks:
        if m.shape != (height, width):
            raise DimensionMismatch("union_all", (height, width), m.shape)
        acc |= m.bits
    return BinaryMask(acc)


def translate(m: BinaryMask, offset: tuple[int, int], dims: tuple[int, int]) -> BinaryMask:
    """Place m into a (width, height) canvas shifted by offset = (dx, dy)."""
    dx, dy = offset
    w, h = dims
    bits = np.zeros((h, w), dtype=bool)
    bits[dy : dy + m.height, dx : dx + m.width] = m.bits
    return BinaryMask(bits)


def crop(m: BinaryMask, offset: tuple[int, int], dims: tuple[int, int]) -> BinaryMask:
    """Inverse of translate: cut the (width, height) window at offset."""
    dx, dy = offset
    w, h = dims
    return BinaryMask(m.bits[dy : dy + h, dx : dx + w])
