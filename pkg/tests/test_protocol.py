"""Wire protocol fidelity: in-process mocks vs. the served protocol."""
import socket

import pytest

from amodalkit import synth
from amodalkit.completion import run_completion
from amodalkit.config import PipelineConfig
from amodalkit.providers import ProviderEndpoint, RemoteProviders, SceneProviders
from amodalkit.providers.conformance import check_protocol
from amodalkit.providers.server import ServerThread
from amodalkit.synth import GenSpec


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def scene():
    return synth.generate(31, GenSpec(canvas=(96, 96), n_shapes=(3, 3)))


def test_served_mocks_conform(scene):
    with ServerThread(SceneProviders(scene), port=free_port()) as server:
        failures = check_protocol(server.base_url)
    assert failures == []


def test_wire_equals_in_process(scene):
    img = synth.render(scene)
    query = synth.most_occluded_shape(scene)
    cfg = PipelineConfig()

    local = run_completion(img, query, SceneProviders(scene), cfg)

    with ServerThread(SceneProviders(scene), port=free_port()) as server:
        remote_providers = RemoteProviders(ProviderEndpoint(base_url=server.base_url))
        remote = run_completion(img, query, remote_providers, cfg)

    assert remote.status == local.status
    assert remote.rgba == local.rgba
    assert remote.amodal == local.amodal
    assert remote.trace_dict(cfg) == local.trace_dict(cfg)
    assert remote.rgba.to_png_bytes() == local.rgba.to_png_bytes()


def test_wire_not_found_round_trip(scene):
    img = synth.render(scene)
    with ServerThread(SceneProviders(scene), port=free_port()) as server:
        remote = RemoteProviders(ProviderEndpoint(base_url=server.base_url))
        assert remote.ground_segment(img, "nonexistent thing") is None


def test_served_masks_round_trip_bit_exact(scene):
    img = synth.render(scene)
    with ServerThread(SceneProviders(scene), port=free_port()) as server:
        remote = RemoteProviders(ProviderEndpoint(base_url=server.base_url))
        for s in scene.shapes:
            got = remote.ground_segment(img, s.name)
            assert got == synth.visible_mask(scene, s.name)
        tags = remote.tag_scene(img)
        assert list(tags) == [s.name for s in sorted(scene.shapes, key=lambda x: -x.z)]
