"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion; every tolerance is asserted exactly as stated.
"""
import json
import socket
import time

import numpy as np
import pytest

from amodalkit import masks as mk
from amodalkit import synth
from amodalkit.cli import main
from amodalkit.completion import run_completion
from amodalkit.config import PipelineConfig
from amodalkit.errors import BackendUnavailable
from amodalkit.evaluation import (
    DegenerateAgreement,
    RatingsTable,
    failure_table,
    fleiss_kappa,
    ssim,
)
from amodalkit.imaging import Image
from amodalkit.masks import BinaryMask, StructuringElement
from amodalkit.occlusion import build_occluder_mask
from amodalkit.providers import ProviderEndpoint, RemoteProviders, SceneProviders
from amodalkit.providers.server import ServerThread
from amodalkit.scene import segment_scene
from amodalkit.synth import GenSpec

CFG = PipelineConfig()
ACCEPTANCE_SPEC = GenSpec(canvas=(256, 256), n_shapes=(3, 5))


def ok(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


@pytest.fixture(scope="module")
def oracle_runs():
    """Seeds 1-100, 3-5 shapes, 256x256, oracle mock providers."""
    runs = []
    started = time.monotonic()
    for seed in range(1, 101):
        scene = synth.generate(seed, ACCEPTANCE_SPEC)
        img = synth.render(scene)
        query = synth.most_occluded_shape(scene)
        result = run_completion(img, query, SceneProviders(scene), CFG)
        runs.append((scene, img, query, result))
    elapsed = time.monotonic() - started
    return runs, elapsed


def test_oracle_end_to_end(oracle_runs):
    runs, elapsed = oracle_runs
    good = 0
    for scene, _img, query, result in runs:
        assert result.status == "completed"
        truth = synth.amodal_mask(scene, query)
        got = result.amodal
        if got.shape != truth.shape:
            got = mk.crop(got, result.canvas_offset, scene.canvas)
        if mk.metrics(got, truth).iou >= 0.95:
            good += 1
    assert good >= 98, f"only {good}/100 runs reached IoU 0.95"
    assert elapsed < 60.0, f"100 oracle runs took {elapsed:.1f}s"
    ok(f"oracle end-to-end ({good}/100 scenes at IoU>=0.95 in {elapsed:.1f}s)")


def test_boundary_cases():
    spec = GenSpec(canvas=(256, 256), n_shapes=(3, 5), allow_boundary=True)
    detected, covered_ok = 0, 0
    for seed in range(1, 26):
        scene = synth.generate(seed, spec)
        name = synth.boundary_shape(scene)
        img = synth.render(scene)
        result = run_completion(img, name, SceneProviders(scene), CFG)
        assert result.status == "completed"
        truth_edges = mk.boundary_contacts(synth.visible_mask(scene, name))
        if set(result.report.boundary_edges.edges) == set(truth_edges.edges):
            detected += 1
        dims = (result.rgba.width, result.rgba.height)
        offset = result.canvas_offset
        truth_exp = synth.amodal_mask_on(scene, name, dims, offset)
        inside = mk.translate(BinaryMask.full(256, 256), offset, dims)
        outside_truth = mk.subtract(truth_exp, inside)
        assert not outside_truth.is_empty()
        coverage = mk.intersect(result.amodal, outside_truth).area / outside_truth.area
        if coverage >= 0.90:
            covered_ok += 1
    assert detected == 25, f"boundary contacts detected on {detected}/25"
    assert covered_ok == 25, f"out-of-canvas coverage >=90% on {covered_ok}/25"
    ok("boundary cases (25/25 edges detected, 25/25 outpainted >=90%)")


def test_occluder_mask_equivalence():
    for seed in range(1, 101):
        scene = synth.generate(seed, ACCEPTANCE_SPEC)
        img = synth.render(scene)
        providers = SceneProviders(scene)
        query = synth.most_occluded_shape(scene)
        decomp = segment_scene(img, providers, query, CFG)
        fast = build_occluder_mask(img, decomp.visible, decomp.seg, providers, CFG)
        slow = build_occluder_mask(
            img, decomp.visible, decomp.seg, providers, CFG, skip_non_adjacent=False
        )
        assert slow.queries_skipped == 0
        assert fast.occ_mask == slow.occ_mask, f"seed {seed}: adjacency skip changed the mask"
    ok("occluder-mask equivalence (skip vs exhaustive, bit-exact on 100 scenes)")


def test_termination_oracle_stabilizes(oracle_runs):
    runs, _ = oracle_runs
    for _scene, _img, _query, result in runs:
        assert result.termination == "stabilized"
        assert len(result.iterations) <= 2
    ok("termination: oracle inpainter stabilized in <=2 iterations on all runs")


def test_termination_churn_hits_cap():
    for seed in range(1, 101):
        scene = synth.generate(seed, ACCEPTANCE_SPEC)
        img = synth.render(scene)
        query = synth.most_occluded_shape(scene)
        result = run_completion(img, query, SceneProviders(scene, churn_inpaint=True), CFG)
        assert result.termination == "max_iterations", f"seed {seed}: {result.termination}"
        assert len(result.iterations) == 3, f"seed {seed}: {len(result.iterations)} iterations"
    ok("termination: churn inpainter stopped at exactly 3 iterations on all runs")


def test_blending_preserves_visible_interior(oracle_runs):
    runs, _ = oracle_runs
    se = StructuringElement("square", CFG.transition_width)
    for _scene, img, _query, result in runs:
        interior = mk.erode(result.visible, se)
        rgb = result.rgba.pixels[:, :, :3]
        src = img.pixels
        if result.rgba.shape != img.shape:
            ox, oy = result.canvas_offset
            rgb = rgb[oy : oy + img.height, ox : ox + img.width]
            interior = mk.crop(interior, result.canvas_offset, (img.width, img.height))
        assert np.array_equal(rgb[interior.bits], src[interior.bits])
        alpha = result.rgba.pixels[:, :, 3]
        assert set(np.unique(alpha)) <= {0, 255}
    ok("blending: visible interior bit-exact, alpha strictly binary, all runs")


def test_morphology_mask_suite():
    rng = np.random.default_rng(2024)
    se = StructuringElement("square", 1)
    for _ in range(200):
        m = BinaryMask(rng.random((32, 32)) < rng.uniform(0.2, 0.8))
        er, di = mk.erode(m, se), mk.dilate(m, se)
        assert not np.any(er.bits & ~m.bits)
        assert not np.any(m.bits & ~di.bits)
        assert not np.any(mk.open_mask(m, se).bits & ~m.bits)
        assert not np.any(m.bits & ~mk.close_mask(m, se).bits)
    for _ in range(200):
        m = BinaryMask(rng.random((32, 32)) < 0.5)
        comps = mk.connected_components(m)
        total = np.zeros((32, 32), bool)
        for c in comps:
            assert not (total & c.bits).any()
            total |= c.bits
        assert np.array_equal(total, m.bits)
    for _ in range(200):
        a = BinaryMask(rng.random((32, 32)) < 0.5)
        b = BinaryMask(rng.random((32, 32)) < 0.5)
        c = BinaryMask(rng.random((32, 32)) < 0.5)
        assert mk.l1_diff(a, b) == mk.l1_diff(b, a)
        assert (mk.l1_diff(a, b) == 0) == (a == b)
        assert mk.l1_diff(a, c) <= mk.l1_diff(a, b) + mk.l1_diff(b, c)
    ok("morphology/mask property suite (200 random 32x32 masks per property)")


def test_ssim_criteria():
    rng = np.random.default_rng(7)
    for _ in range(20):
        img = Image(rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8))
        assert abs(ssim(img, img) - 1.0) <= 1e-9
    a = Image.solid(16, 16, (100, 100, 100))
    c = Image.solid(16, 16, (150, 150, 150))
    c1 = (0.01 * 255) ** 2
    want = (2 * 100 * 150 + c1) / (100**2 + 150**2 + c1)
    assert abs(ssim(a, c) - want) <= 1e-9
    for _ in range(10):
        x = Image(rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8))
        y = Image(rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8))
        assert abs(ssim(x, y) - ssim(y, x)) <= 1e-12
    ok("ssim: identity 1e-9, constant closed form 1e-9, symmetry 1e-12")


def test_fleiss_kappa_criteria():
    perfect = RatingsTable(np.array([[5, 0, 0], [0, 5, 0], [0, 0, 5]]))
    assert fleiss_kappa(perfect) == 1.0
    assert abs(fleiss_kappa(RatingsTable(np.array([[3, 0], [0, 3]]))) - 1.0) <= 1e-12
    assert abs(fleiss_kappa(RatingsTable(np.array([[2, 1], [1, 2]]))) + 1.0 / 3.0) <= 1e-12
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        n_items = int(rng.integers(2, 12))
        k = int(rng.integers(2, 6))
        n = int(rng.integers(2, 8))
        counts = np.zeros((n_items, k), dtype=np.int64)
        for i in range(n_items):
            for p in rng.integers(0, k, size=n):
                counts[i, p] += 1
        try:
            base = fleiss_kappa(RatingsTable(counts))
        except DegenerateAgreement:
            continue
        perm = rng.permutation(k)
        assert abs(fleiss_kappa(RatingsTable(counts[:, perm])) - base) <= 1e-12
        checked += 1
    ok("fleiss kappa: exact 1.0, hand values, 50 column-permutation checks")


def test_failure_accounting():
    from fractions import Fraction

    outcomes = []
    for i in range(40):
        outcomes.append({"dataset": "vg", "status": "target_not_found" if i < 3 else "completed"})
    for i in range(60):
        outcomes.append({"dataset": "coco", "status": "target_not_found" if i < 1 else "completed"})
    rates = failure_table(outcomes)
    assert rates.formatted() == "4.0%"
    assert rates.per_dataset["vg"] == Fraction(3, 40)
    assert rates.per_dataset["coco"] == Fraction(1, 60)
    assert rates.formatted("vg") == "7.5%"
    weighted = (Fraction(3, 40) * 40 + Fraction(1, 60) * 60) / 100
    assert rates.overall == weighted

    clean = failure_table([{"dataset": "p2g", "status": "completed"} for _ in range(100)])
    assert clean.formatted() == "0.0%"
    ok("failure accounting: 4/100 -> 4.0% with per-dataset splits; 0 -> 0.0%")


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_protocol_fidelity():
    spec = GenSpec(canvas=(128, 128), n_shapes=(3, 4))
    for seed in range(1, 11):
        scene = synth.generate(seed, spec)
        img = synth.render(scene)
        query = synth.most_occluded_shape(scene)
        local = run_completion(img, query, SceneProviders(scene), CFG)
        with ServerThread(SceneProviders(scene), port=free_port()) as server:
            remote = run_completion(
                img, query, RemoteProviders(ProviderEndpoint(base_url=server.base_url)), CFG
            )
        assert remote.rgba == local.rgba, f"seed {seed}: wire result differs"
        assert remote.amodal == local.amodal
        assert remote.trace_dict(CFG) == local.trace_dict(CFG)
    ok("protocol fidelity: in-process vs wire bit-identical on 10 scenes")


def test_repeat_runs_byte_identical(tmp_path):
    bundle = tmp_path / "bundle"
    scene = synth.generate(42, ACCEPTANCE_SPEC)
    synth.write_bundle(scene, bundle)
    query = synth.most_occluded_shape(scene)
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        code = main([
            "complete", "--image", str(bundle / "rendered.png"), "--query", query,
            "--out", str(out), "--mock-scene", str(bundle),
        ])
        assert code == 0
        outs.append(out)
    a, b = outs
    assert (a / "trace.json").read_bytes() == (b / "trace.json").read_bytes()
    assert (a / "result.png").read_bytes() == (b / "result.png").read_bytes()

    # also through a boundary scene, which pads the canvas
    bscene = synth.generate(3, GenSpec(canvas=(256, 256), n_shapes=(3, 4), allow_boundary=True))
    bbundle = tmp_path / "bbundle"
    synth.write_bundle(bscene, bbundle)
    bquery = synth.boundary_shape(bscene)
    pair = []
    for tag in ("b1", "b2"):
        out = tmp_path / tag
        assert main([
            "complete", "--image", str(bbundle / "rendered.png"), "--query", bquery,
            "--out", str(out), "--mock-scene", str(bbundle),
        ]) == 0
        pair.append(out)
    assert (pair[0] / "trace.json").read_bytes() == (pair[1] / "trace.json").read_bytes()
    assert (pair[0] / "result.png").read_bytes() == (pair[1] / "result.png").read_bytes()
    ok("determinism: repeated runs byte-identical (trace.json, result.png)")


def test_backend_service_conformance_when_present():
    """[SECONDARY] gate; skipped cleanly when the backend package is absent."""
    backend = pytest.importorskip("backend_service")
    from amodalkit.providers.conformance import check_protocol

    with backend.stub_server_thread(port=free_port()) as server:
        failures = check_protocol(server.base_url)
    assert failures == []
    ok("backend_service --stub conforms to the provider protocol")
