"""CLI exit codes, outputs, and batch determinism."""
import json
import time

import pytest

from amodalkit import synth
from amodalkit.cli import main
from amodalkit.synth import GenSpec


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    scene = synth.generate(21, GenSpec(canvas=(128, 128), n_shapes=(3, 3)))
    synth.write_bundle(scene, root / "scene_a")
    return root / "scene_a", scene


def test_complete_success(tmp_path, scene_dir):
    bundle, scene = scene_dir
    out = tmp_path / "run"
    query = synth.most_occluded_shape(scene)
    code = main([
        "complete",
        "--image", str(bundle / "rendered.png"),
        "--query", query,
        "--out", str(out),
        "--mock-scene", str(bundle),
    ])
    assert code == 0
    assert (out / "result.png").exists()
    assert (out / "amodal.png").exists()
    trace = json.loads((out / "trace.json").read_text())
    assert trace["status"] == "completed"
    assert trace["query"] == query


def test_complete_not_found_exit_3(tmp_path, scene_dir):
    bundle, _ = scene_dir
    out = tmp_path / "run"
    code = main([
        "complete",
        "--image", str(bundle / "rendered.png"),
        "--query", "warp drive",
        "--out", str(out),
        "--mock-scene", str(bundle),
    ])
    assert code == 3
    assert not (out / "result.png").exists()
    assert (out / "trace.json").exists()


def test_complete_unreachable_endpoint_exit_1(tmp_path, scene_dir):
    bundle, scene = scene_dir
    started = time.monotonic()
    code = main([
        "complete",
        "--image", str(bundle / "rendered.png"),
        "--query", scene.shapes[0].name,
        "--out", str(tmp_path / "run"),
        "--endpoint", "http://127.0.0.1:9",  # discard port: nothing listens
        "--timeout", "0.5",
        "--retries", "1",
    ])
    elapsed = time.monotonic() - started
    assert code == 1
    assert elapsed < 0.5 * (1 + 1) + 4.0


def test_complete_usage_errors(tmp_path, scene_dir):
    bundle, scene = scene_dir
    # both providers given
    code = main([
        "complete", "--image", str(bundle / "rendered.png"), "--query", "x",
        "--out", str(tmp_path / "o"), "--mock-scene", str(bundle),
        "--endpoint", "http://x",
    ])
    assert code == 2
    # image without scene.json and no provider flags
    orphan = tmp_path / "orphan.png"
    synth.render(scene).save_png(orphan)
    code = main(["complete", "--image", str(orphan), "--query", "x", "--out", str(tmp_path / "o2")])
    assert code == 2


def test_complete_debug_writes_iteration_pngs(tmp_path, scene_dir):
    bundle, scene = scene_dir
    out = tmp_path / "dbg"
    query = synth.most_occluded_shape(scene)
    code = main([
        "complete", "--image", str(bundle / "rendered.png"), "--query", query,
        "--out", str(out), "--mock-scene", str(bundle), "--debug",
    ])
    assert code == 0
    assert (out / "debug" / "iter_0_inpainted.png").exists()


def test_synth_gen_deterministic(tmp_path):
    args = ["synth", "gen", "--seed", "7", "--count", "3",
            "--canvas", "96", "--min-shapes", "2", "--max-shapes", "3"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for i in range(7, 10):
        a = (tmp_path / "a" / f"scene_{i:04d}" / "scene.json").read_bytes()
        b = (tmp_path / "b" / f"scene_{i:04d}" / "scene.json").read_bytes()
        assert a == b
    assert (tmp_path / "a" / "scene_0007" / "rendered.png").exists()


def make_batch(tmp_path, n_good=3, n_bad=1):
    scenes_dir = tmp_path / "scenes"
    jobs = []
    for i in range(n_good + n_bad):
        scene = synth.generate(100 + i, GenSpec(canvas=(96, 96), n_shapes=(2, 3)))
        job_id = f"job{i:02d}"
        bundle = scenes_dir / job_id
        synth.write_bundle(scene, bundle)
        query = synth.most_occluded_shape(scene) if i < n_good else "nothing-here"
        jobs.append({
            "id": job_id,
            "image": str(bundle / "rendered.png"),
            "query": query,
            "dataset": "even" if i % 2 == 0 else "odd",
        })
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"jobs": jobs}))
    return manifest


def test_batch_counts_and_exit(tmp_path):
    manifest = make_batch(tmp_path, n_good=3, n_bad=2)
    out = tmp_path / "out"
    assert main(["batch", "--manifest", str(manifest), "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["counts"] == {"completed": 3, "target_not_found": 2}
    assert [j["id"] for j in summary["jobs"]] == sorted(j["id"] for j in summary["jobs"])


def test_batch_workers_do_not_change_bytes(tmp_path):
    manifest = make_batch(tmp_path, n_good=3, n_bad=1)
    out1, out4 = tmp_path / "w1", tmp_path / "w4"
    assert main(["batch", "--manifest", str(manifest), "--out-dir", str(out1), "--workers", "1"]) == 0
    assert main(["batch", "--manifest", str(manifest), "--out-dir", str(out4), "--workers", "4"]) == 0
    assert (out1 / "summary.json").read_bytes() == (out4 / "summary.json").read_bytes()
    for job_dir in sorted(out1.iterdir()):
        if job_dir.is_dir():
            a = (job_dir / "trace.json").read_bytes()
            b = (out4 / job_dir.name / "trace.json").read_bytes()
            assert a == b


def test_batch_invalid_manifests(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"jobs": []}))
    assert main(["batch", "--manifest", str(empty), "--out-dir", str(tmp_path / "o")]) == 2

    dup = tmp_path / "dup.json"
    scene = synth.generate(1, GenSpec(canvas=(96, 96), n_shapes=(2, 2)))
    bundle = tmp_path / "sdup"
    synth.write_bundle(scene, bundle)
    img = str(bundle / "rendered.png")
    dup.write_text(json.dumps({"jobs": [
        {"id": "a", "image": img, "query": "x"},
        {"id": "a", "image": img, "query": "y"},
    ]}))
    assert main(["batch", "--manifest", str(dup), "--out-dir", str(tmp_path / "o2")]) == 2

    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"jobs": [{"id": "a", "image": "nope.png", "query": "x"}]}))
    assert main(["batch", "--manifest", str(missing), "--out-dir", str(tmp_path / "o3")]) == 2


def test_eval_run_and_kappa(tmp_path):
    manifest = make_batch(tmp_path, n_good=2, n_bad=1)
    results = tmp_path / "results"
    assert main(["batch", "--manifest", str(manifest), "--out-dir", str(results)]) == 0
    report_path = tmp_path / "report.json"
    code = main([
        "eval", "run",
        "--results-dir", str(results),
        "--truth-dir", str(tmp_path / "scenes"),
    "--report", str(report_path),
    ])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["counts"]["completed"] == 2
    assert report["counts"]["target_not_found"] == 1
    ious = [i["iou"] for i in report["items"] if "iou" in i]
    assert len(ious) == 2 and all(v >= 0.95 for v in ious)
    # clip score is metric-missing without a backend
    assert all(i.get("clip_score") is None for i in report["items"] if i["status"] == "completed")

    ratings = tmp_path / "ratings.csv"
    ratings.write_text(
        "image_id,rater_id,chosen_method\n"
        "i1,r1,ours\ni1,r2,ours\ni1,r3,ours\n"
        "i2,r1,other\ni2,r2,other\ni2,r3,other\n"
    )
    code = main(["eval", "kappa", "--ratings", str(ratings)])
    assert code == 0


def test_eval_kappa_prints_three_decimals(tmp_path, capsys):
    ratings = tmp_path / "r.csv"
    ratings.write_text(
        "image_id,rater_id,chosen_method\n"
        "i1,r1,a\ni1,r2,a\ni1,r3,a\n"
        "i2,r1,b\ni2,r2,b\ni2,r3,b\n"
    )
    assert main(["eval", "kappa", "--ratings", str(ratings)]) == 0
    assert capsys.readouterr().out.strip() == "1.000"


def test_config_file_and_set_overrides(tmp_path, scene_dir):
    bundle, scene = scene_dir
    cfg_file = tmp_path / "pipeline.cfg"
    cfg_file.write_text("max_iterations = 2\ntransition_width = 3  # narrower blend band\n")
    out = tmp_path / "run"
    query = synth.most_occluded_shape(scene)
    code = main([
        "complete", "--image", str(bundle / "rendered.png"), "--query", query,
        "--out", str(out), "--mock-scene", str(bundle),
        "--config", str(cfg_file), "--set", "epsilon_frac=0.002",
    ])
    assert code == 0
    trace = json.loads((out / "trace.json").read_text())
    assert trace["config"]["max_iterations"] == 2
    assert trace["config"]["transition_width"] == 3
    assert trace["config"]["epsilon_frac"] == 0.002
