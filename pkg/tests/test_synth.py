"""Synthetic layered-scene generator and its ground-truth guarantees."""
import numpy as np
import pytest

from amodalkit import masks as mk
from amodalkit import synth
from amodalkit.masks import BinaryMask
from amodalkit.synth import GenSpec


def small_spec(**kw):
    return GenSpec(canvas=(96, 96), n_shapes=(2, 3), **kw)


def test_generate_deterministic():
    a = synth.generate(42, small_spec())
    b = synth.generate(42, small_spec())
    assert a == b
    assert synth.scene_to_dict(a) == synth.scene_to_dict(b)


def test_generate_rejects_single_shape():
    with pytest.raises(ValueError):
        synth.generate(1, GenSpec(n_shapes=(1, 1)))


def test_interior_scenes_touch_no_edge():
    for seed in range(1, 6):
        scene = synth.generate(seed, small_spec())
        for s in scene.shapes:
            assert not mk.boundary_contacts(synth.amodal_mask(scene, s.name))


def test_two_shape_scene_has_exactly_one_overlap():
    scene = synth.generate(7, GenSpec(canvas=(96, 96), n_shapes=(2, 2)))
    assert len(scene.shapes) == 2
    a, b = scene.shapes
    inter = mk.intersect(synth.amodal_mask(scene, a.name), synth.amodal_mask(scene, b.name))
    assert not inter.is_empty()


def test_scene_invariants():
    scene = synth.generate(3, small_spec())
    names = scene.names()
    assert len(set(names)) == len(names)
    zs = [s.z for s in scene.shapes]
    assert len(set(zs)) == len(zs)
    canvas_px = scene.canvas[0] * scene.canvas[1]
    for s in scene.shapes:
        assert synth.amodal_mask(scene, s.name).area >= 0.04 * canvas_px


def test_render_background_and_single_shape():
    scene = synth.generate(5, small_spec())
    img = synth.render(scene)
    covered = np.zeros(img.shape, dtype=bool)
    for s in scene.shapes:
        covered |= synth.amodal_mask(scene, s.name).bits
    assert (img.pixels[~covered] == scene.background_color).all()


def test_render_visibility_consistency():
    """Visible pixels must carry exactly their own shape's fill, top shape wins overlaps."""
    for seed in (2, 9, 14):
        scene = synth.generate(seed, small_spec())
        img = synth.render(scene)
        for s in scene.shapes:
            vis = synth.visible_mask(scene, s.name)
            fill = synth.fill_image(s, scene.canvas)
            assert np.array_equal(img.pixels[vis.bits], fill.pixels[vis.bits])


def test_visible_masks_partition_foreground():
    for seed in (4, 8):
        scene = synth.generate(seed, small_spec())
        total = BinaryMask.empty(*scene.canvas)
        for s in scene.shapes:
            vis = synth.visible_mask(scene, s.name)
            assert mk.intersect(total, vis).is_empty()
            total = mk.union(total, vis)
        covered = BinaryMask.empty(*scene.canvas)
        for s in scene.shapes:
            covered = mk.union(covered, synth.amodal_mask(scene, s.name))
        assert total == covered


def test_visible_amodal_set_identity():
    """visible ∪ (amodal ∩ higher-union) = amodal on random scenes."""
    for seed in (6, 11, 13):
        scene = synth.generate(seed, small_spec())
        for s in scene.shapes:
            amodal = synth.amodal_mask(scene, s.name)
            vis = synth.visible_mask(scene, s.name)
            higher = BinaryMask.empty(*scene.canvas)
            for o in scene.shapes:
                if o.z > s.z:
                    higher = mk.union(higher, synth.amodal_mask(scene, o.name))
            rebuilt = mk.union(vis, mk.intersect(amodal, higher))
            assert rebuilt == amodal


def test_topmost_shape_fully_visible():
    scene = synth.generate(10, small_spec())
    top = max(scene.shapes, key=lambda s: s.z)
    assert synth.visible_mask(scene, top.name) == synth.amodal_mask(scene, top.name)


def test_occlusion_truth():
    scene = synth.generate(12, small_spec())
    shapes = sorted(scene.shapes, key=lambda s: s.z)
    low, high = shapes[0], shapes[-1]
    overlap = mk.intersect(
        synth.amodal_mask(scene, low.name), synth.amodal_mask(scene, high.name)
    )
    assert synth.occlusion_truth(scene, high.name, low.name) is False  # lower z never occludes
    assert synth.occlusion_truth(scene, low.name, high.name) is bool(not overlap.is_empty())
    with pytest.raises(ValueError):
        synth.occlusion_truth(scene, low.name, low.name)
    with pytest.raises(ValueError):
        synth.occlusion_truth(scene, "nosuch", high.name)


def test_occlusion_truth_antisymmetric_for_overlapping_pairs():
    scene = synth.generate(15, small_spec())
    for a in scene.shapes:
        for b in scene.shapes:
            if a.name == b.name:
                continue
            both = synth.occlusion_truth(scene, a.name, b.name) and synth.occlusion_truth(
                scene, b.name, a.name
            )
            assert not both


def test_boundary_scene_crosses_one_edge():
    for seed in (1, 2, 3):
        scene = synth.generate(seed, GenSpec(canvas=(96, 96), n_shapes=(2, 3), allow_boundary=True))
        name = synth.boundary_shape(scene)
        assert name is not None
        contacts = mk.boundary_contacts(synth.amodal_mask(scene, name))
        assert len(contacts) == 1
        vis_contacts = mk.boundary_contacts(synth.visible_mask(scene, name))
        assert set(vis_contacts.edges) == set(contacts.edges)
        # truth extends beyond the canvas on the expanded view
        w, h = scene.canvas
        exp = synth.amodal_mask_on(scene, name, (w + 16, h + 16), (8, 8))
        assert exp.area > synth.amodal_mask(scene, name).area


def test_expanded_canvas_rasterization_consistent():
    scene = synth.generate(20, small_spec())
    w, h = scene.canvas
    for s in scene.shapes:
        base = synth.amodal_mask(scene, s.name)
        shifted = synth.amodal_mask_on(scene, s.name, (w + 10, h + 6), (7, 3))
        assert np.array_equal(shifted.bits[3 : 3 + h, 7 : 7 + w], base.bits)


def test_scene_json_round_trip(tmp_path):
    scene = synth.generate(33, small_spec())
    p = tmp_path / "scene.json"
    synth.save_scene(scene, p)
    assert synth.load_scene(p) == scene


def test_bundle_write(tmp_path):
    scene = synth.generate(44, small_spec())
    synth.write_bundle(scene, tmp_path / "b")
    assert (tmp_path / "b" / "scene.json").exists()
    assert (tmp_path / "b" / "rendered.png").exists()
    for s in scene.shapes:
        assert (tmp_path / "b" / "masks" / f"{s.name}_amodal.png").exists()
    reloaded = synth.load_scene(tmp_path / "b" / "scene.json")
    assert synth.render(reloaded) == synth.render(scene)
