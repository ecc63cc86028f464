"""Deterministic layered-scene generator with exact visibility ground truth.

Scenes are stacks of parametric shapes (rectangle / ellipse / triangle) with
unique depth values, rendered by painter's algorithm over a flat background.
Because fills are solid colors or two-color checkers, the true appearance of
any shape is reconstructable analytically at any canvas placement, which is
what lets the mock providers behave as a perfect oracle in tests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import masks as mk
from .errors import GenerationError
from .imaging import Image
from .masks import BinaryMask, StructuringElement

SHAPE_KINDS = ("rectangle", "ellipse", "triangle")

# shape fills keep a wide margin from the default gray background so
# background-difference thresholding in the pipeline is unambiguous
PALETTE = (
    (214, 45, 38),
    (36, 74, 212),
    (242, 196, 34),
    (34, 168, 74),
    (196, 52, 198),
    (38, 190, 196),
    (240, 128, 32),
    (110, 46, 180),
    (160, 210, 60),
    (250, 90, 140),
)

NAME_POOL = (
    "apple", "banana", "carrot", "dolphin", "eagle", "falcon", "grape",
    "heron", "iris", "jasper", "kiwi", "lemon", "mango", "nectar", "olive",
    "peach", "quince", "radish", "squash", "tulip", "umber", "violet",
    "walnut", "yarrow", "zinnia",
)

MIN_SHAPE_AREA_FRAC = 0.04
MIN_VISIBLE_FRAC = 0.01
MIN_OCCLUSION_FRAC = 0.01
ADJACENCY_RADIUS = 2
MAX_ATTEMPTS = 500
BOUNDARY_EDGE_CLEARANCE = 10
MIN_OUTSIDE_PIXELS = 12


@dataclass(frozen=True)
class ShapeFill:
    kind: str  # solid | checker
    colors: tuple[tuple[int, int, int], ...]
    cell: int = 8


@dataclass(frozen=True)
class SceneShape:
    name: str
    kind: str
    params: tuple[float, ...]
    fill: ShapeFill
    z: int


@dataclass(frozen=True)
class SyntheticScene:
    canvas: tuple[int, int]  # (width, height)
    background_color: tuple[int, int, int]
    seed: int
    shapes: tuple[SceneShape, ...]

    def shape(self, name: str) -> SceneShape:
        for s in self.shapes:
            if s.name == name:
                return s
        raise ValueError(f"no shape named {name!r} in scene")

    def names(self) -> list[str]:
        return [s.name for s in self.shapes]


@dataclass(frozen=True)
class GenSpec:
    canvas: tuple[int, int] = (256, 256)
    n_shapes: tuple[int, int] = (3, 5)
    allow_boundary: bool = False


def _scene_grids(dims: tuple[int, int], offset: tuple[int, int]):
    """Pixel-center coordinates of a (width, height) canvas in scene space."""
    w, h = dims
    ox, oy = offset
    ys, xs = np.mgrid[0:h, 0:w]
    return xs - ox + 0.5, ys - oy + 0.5


def rasterize(shape: SceneShape, dims: tuple[int, int], offset: tuple[int, int] = (0, 0)) -> BinaryMask:
    """Hard-edged rasterization of a shape onto a canvas placed at offset."""
    sx, sy = _scene_grids(dims, offset)
    k = shape.kind
    p = shape.params
    if k == "rectangle":
        x, y, w, h = p
        bits = (sx >= x) & (sx < x + w) & (sy >= y) & (sy < y + h)
    elif k == "ellipse":
        cx, cy, rx, ry = p
        bits = ((sx - cx) / rx) ** 2 + ((sy - cy) / ry) ** 2 <= 1.0
    elif k == "triangle":
        x1, y1, x2, y2, x3, y3 = p
        d1 = (sx - x2) * (y1 - y2) - (x1 - x2) * (sy - y2)
        d2 = (sx - x3) * (y2 - y3) - (x2 - x3) * (sy - y3)
        d3 = (sx - x1) * (y3 - y1) - (x3 - x1) * (sy - y1)
        neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
        pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
        bits = ~(neg & pos)
    else:
        raise ValueError(f"unknown shape kind {k!r}")
    return BinaryMask(bits)


def fill_image(shape: SceneShape, dims: tuple[int, int], offset: tuple[int, int] = (0, 0)) -> Image:
    """Full-canvas image of the shape's fill pattern (ignores the shape outline)."""
    w, h = dims
    ox, oy = offset
    if shape.fill.kind == "solid":
        return Image.solid(w, h, shape.fill.colors[0])
    c1, c2 = shape.fill.colors
    cell = shape.fill.cell
    ys, xs = np.mgrid[0:h, 0:w]
    ix = xs - ox
    iy = ys - oy
    parity = ((ix // cell) + (iy // cell)) % 2
    buf = np.where(parity[:, :, None] == 0, np.array(c1, np.uint8), np.array(c2, np.uint8))
    return Image(buf.astype(np.uint8))


def amodal_mask(scene: SyntheticScene, name: str) -> BinaryMask:
    """The shape's full rasterization clipped to the scene canvas."""
    return rasterize(scene.shape(name), scene.canvas)


def visible_mask(scene: SyntheticScene, name: str) -> BinaryMask:
    """Amodal mask minus everything drawn above it."""
    return visible_mask_on(scene, name, scene.canvas, (0, 0))


def amodal_mask_on(scene: SyntheticScene, name: str, dims: tuple[int, int], offset: tuple[int, int]) -> BinaryMask:
    return rasterize(scene.shape(name), dims, offset)


def visible_mask_on(scene: SyntheticScene, name: str, dims: tuple[int, int], offset: tuple[int, int]) -> BinaryMask:
    target = scene.shape(name)
    bits = rasterize(target, dims, offset).bits.copy()
    for s in scene.shapes:
        if s.z > target.z:
            bits &= ~rasterize(s, dims, offset).bits
    return BinaryMask(bits)


def render(scene: SyntheticScene) -> Image:
    """Painter's algorithm by ascending z over the background color."""
    return render_on(scene, scene.canvas, (0, 0))


def render_on(scene: SyntheticScene, dims: tuple[int, int], offset: tuple[int, int]) -> Image:
    w, h = dims
    buf = Image.solid(w, h, scene.background_color).pixels.copy()
    for s in sorted(scene.shapes, key=lambda s: s.z):
        m = rasterize(s, dims, offset)
        buf[m.bits] = fill_image(s, dims, offset).pixels[m.bits]
    return Image(buf)


def occlusion_truth(scene: SyntheticScene, target_name: str, candidate_name: str) -> bool:
    """True iff the candidate sits above the target and their full shapes overlap."""
    if target_name == candidate_name:
        raise ValueError("occlusion_truth needs two distinct shapes")
    t = scene.shape(target_name)
    c = scene.shape(candidate_name)
    if c.z <= t.z:
        return False
    overlap = rasterize(t, scene.canvas).bits & rasterize(c, scene.canvas).bits
    return bool(overlap.any())


def occluded_area(scene: SyntheticScene, name: str) -> int:
    return amodal_mask(scene, name).area - visible_mask(scene, name).area


def most_occluded_shape(scene: SyntheticScene) -> str:
    """Deterministic pick of the shape with the largest hidden region."""
    best = max(scene.shapes, key=lambda s: (occluded_area(scene, s.name), -s.z, s.name))
    return best.name


def boundary_shape(scene: SyntheticScene) -> str | None:
    """Name of the shape whose full extent touches the canvas edge, if any."""
    for s in scene.shapes:
        if mk.boundary_contacts(rasterize(s, scene.canvas)):
            return s.name
    return None


# ---------------------------------------------------------------------------
# generation

def _sample_shape(rng, name, z, canvas, boundary_edge=None):
    w, h = canvas
    scale = min(w, h)
    kind = SHAPE_KINDS[int(rng.integers(0, len(SHAPE_KINDS)))]

    if boundary_edge is None:
        margin = int(0.06 * scale)
        cx = float(rng.uniform(margin + 0.14 * scale, w - margin - 0.14 * scale))
        cy = float(rng.uniform(margin + 0.14 * scale, h - margin - 0.14 * scale))
    else:
        # stick out past one edge by a small, bounded amount so the expanded
        # canvas can hold the whole shape
        extend = float(rng.uniform(2.0, 6.0))
        cx = float(rng.uniform(0.3 * w, 0.7 * w))
        cy = float(rng.uniform(0.3 * h, 0.7 * h))

    if kind == "rectangle":
        rw = float(rng.uniform(0.22 * scale, 0.42 * scale))
        rh = float(rng.uniform(0.22 * scale, 0.42 * scale))
        if boundary_edge == "left":
            cx = rw / 2 - extend
        elif boundary_edge == "right":
            cx = w - rw / 2 + extend
        elif boundary_edge == "top":
            cy = rh / 2 - extend
        elif boundary_edge == "bottom":
            cy = h - rh / 2 + extend
        params = (cx - rw / 2, cy - rh / 2, rw, rh)
    elif kind == "ellipse":
        rx = float(rng.uniform(0.13 * scale, 0.22 * scale))
        ry = float(rng.uniform(0.13 * scale, 0.22 * scale))
        if boundary_edge == "left":
            cx = rx - extend
        elif boundary_edge == "right":
            cx = w - rx + extend
        elif boundary_edge == "top":
            cy = ry - extend
        elif boundary_edge == "bottom":
            cy = h - ry + extend
        params = (cx, cy, rx, ry)
    else:
        r = float(rng.uniform(0.18 * scale, 0.30 * scale))
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=3))
        # reject skinny triangles by spreading the vertex angles
        while np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))) < 0.9:
            angles = np.sort(rng.uniform(0, 2 * np.pi, size=3))
        xs = cx + r * np.cos(angles)
        ys = cy + r * np.sin(angles)
        if boundary_edge == "left":
            xs += -extend - xs.min()
        elif boundary_edge == "right":
            xs += w + extend - xs.max()
        elif boundary_edge == "top":
            ys += -extend - ys.min()
        elif boundary_edge == "bottom":
            ys += h + extend - ys.max()
        params = tuple(float(v) for pair in zip(xs, ys) for v in pair)

    if rng.random() < 0.3:
        i, j = rng.choice(len(PALETTE), size=2, replace=False)
        fill = ShapeFill("checker", (PALETTE[int(i)], PALETTE[int(j)]), cell=int(rng.choice([6, 8, 10])))
    else:
        fill = ShapeFill("solid", (PALETTE[int(rng.integers(0, len(PALETTE)))],))
    return SceneShape(name=name, kind=kind, params=params, fill=fill, z=z)


def _scene_valid(scene: SyntheticScene, spec: GenSpec, boundary_edge) -> bool:
    w, h = scene.canvas
    canvas_px = w * h
    amodals = {s.name: rasterize(s, scene.canvas) for s in scene.shapes}
    visibles = {}
    for s in scene.shapes:
        bits = amodals[s.name].bits.copy()
        for o in scene.shapes:
            if o.z > s.z:
                bits &= ~amodals[o.name].bits
        visibles[s.name] = BinaryMask(bits)

    for s in scene.shapes:
        if amodals[s.name].area < MIN_SHAPE_AREA_FRAC * canvas_px:
            return False
        if visibles[s.name].area < MIN_VISIBLE_FRAC * canvas_px:
            return False

    overlapping = {
        frozenset((a.name, b.name))
        for i, a in enumerate(scene.shapes)
        for b in scene.shapes[i + 1 :]
        if (amodals[a.name].bits & amodals[b.name].bits).any()
    }
    if not overlapping:
        return False
    if max(
        amodals[s.name].area - visibles[s.name].area for s in scene.shapes
    ) < MIN_OCCLUSION_FRAC * canvas_px:
        return False

    # every true occluder must be spatially adjacent to what it hides, so the
    # engine's adjacency prefilter can never drop a real occluder
    se = StructuringElement("square", ADJACENCY_RADIUS)
    dil = {n: mk.dilate(v, se) for n, v in visibles.items()}
    for pair in overlapping:
        a, b = tuple(pair)
        if not (dil[a].bits & dil[b].bits).any():
            return False

    if boundary_edge is None:
        return all(not mk.boundary_contacts(amodals[s.name]) for s in scene.shapes)

    # boundary scenes: exactly one shape crosses exactly the chosen edge, its
    # contact strip stays unoccluded, and enough truth lies outside the canvas
    bname = None
    for s in scene.shapes:
        contacts = mk.boundary_contacts(amodals[s.name])
        if contacts:
            if set(contacts.edges) != {boundary_edge}:
                return False
            if bname is not None:
                return False
            bname = s.name
    if bname is None:
        return False
    contacts = mk.boundary_contacts(visibles[bname])
    if set(contacts.edges) != {boundary_edge}:
        return False
    clearance = mk.edge_band(BOUNDARY_EDGE_CLEARANCE, scene.canvas, boundary_edge)
    for s in scene.shapes:
        if s.name != bname and (amodals[s.name].bits & clearance.bits).any():
            return False
    probe = 8
    exp_dims = (w + 2 * probe, h + 2 * probe)
    full = rasterize(scene.shape(bname), exp_dims, (probe, probe))
    outside = full.area - amodals[bname].area
    if outside < MIN_OUTSIDE_PIXELS:
        return False
    return True


def generate(seed: int, spec: GenSpec | None = None) -> SyntheticScene:
    """Deterministic scene synthesis; same (seed, spec) always yields the same scene."""
    spec = spec or GenSpec()
    nmin, nmax = spec.n_shapes
    if nmin < 2:
        raise ValueError("need at least 2 shapes for an occlusion to exist")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        n = int(rng.integers(nmin, nmax + 1))
        name_idx = rng.choice(len(NAME_POOL), size=n, replace=False)
        names = [NAME_POOL[int(i)] for i in name_idx]
        boundary_edge = None
        boundary_slot = None
        if spec.allow_boundary:
            boundary_edge = ("top", "bottom", "left", "right")[int(rng.integers(0, 4))]
            boundary_slot = int(rng.integers(0, n))
        shapes = []
        for i in range(n):
            edge = boundary_edge if (boundary_slot is not None and i == boundary_slot) else None
            shapes.append(_sample_shape(rng, names[i], z=i, canvas=spec.canvas, boundary_edge=edge))
        scene = SyntheticScene(
            canvas=spec.canvas,
            background_color=(127, 127, 127),
            seed=seed,
            shapes=tuple(shapes),
        )
        if _scene_valid(scene, spec, boundary_edge):
            return scene
    raise GenerationError(
        f"could not satisfy scene constraints for seed {seed} after {MAX_ATTEMPTS} attempts"
    )


# ---------------------------------------------------------------------------
# serialization

def scene_to_dict(scene: SyntheticScene) -> dict:
    return {
        "canvas": list(scene.canvas),
        "background_color": list(scene.background_color),
        "seed": scene.seed,
        "shapes": [
            {
                "name": s.name,
                "kind": s.kind,
                "z": s.z,
                "params": list(s.params),
                "fill": {
                    "kind": s.fill.kind,
                    "colors": [list(c) for c in s.fill.colors],
                    "cell": s.fill.cell,
                },
            }
            for s in scene.shapes
        ],
    }


def scene_from_dict(d: dict) -> SyntheticScene:
    shapes = tuple(
        SceneShape(
            name=s["name"],
            kind=s["kind"],
            params=tuple(float(v) for v in s["params"]),
            fill=ShapeFill(
                kind=s["fill"]["kind"],
                colors=tuple(tuple(int(v) for v in c) for c in s["fill"]["colors"]),
                cell=int(s["fill"].get("cell", 8)),
            ),
            z=int(s["z"]),
        )
        for s in d["shapes"]
    )
    return SyntheticScene(
        canvas=tuple(d["canvas"]),
        background_color=tuple(d["background_color"]),
        seed=int(d.get("seed", 0)),
        shapes=shapes,
    )


def save_scene(scene: SyntheticScene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n")


def load_scene(path) -> SyntheticScene:
    return scene_from_dict(json.loads(Path(path).read_text()))


def write_bundle(scene: SyntheticScene, out_dir) -> None:
    """Scene bundle: scene.json + rendered.png + per-shape truth masks."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_scene(scene, out / "scene.json")
    render(scene).save_png(out / "rendered.png")
    mask_dir = out / "masks"
    mask_dir.mkdir(exist_ok=True)
    for s in scene.shapes:
        amodal_mask(scene, s.name).save_png(mask_dir / f"{s.name}_amodal.png")
        visible_mask(scene, s.name).save_png(mask_dir / f"{s.name}_visible.png")
