"""Checkpoint round trips and distinct failure modes."""

import struct

import numpy as np
import pytest

from dacp import archs
from dacp.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from dacp.engine import network as nn
from dacp.errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from dacp.pruning import apply_prune, compute_prune_plan, resnet_union_adjust

from conftest import make_toy_net


def f32_net(rng):
    """Toy net whose weights are exactly float32-representable."""
    net = make_toy_net(rng)
    for i, w in net.weights.items():
        net.weights[i] = w.astype(np.float32).astype(np.float64)
    for i, b in net.biases.items():
        net.biases[i] = b.astype(np.float32).astype(np.float64)
    return net


class TestRoundTrip:
    def test_save_load_save_byte_identical(self, tmp_path, rng):
        net = make_toy_net(rng)
        p1, p2 = tmp_path / "a.dacp", tmp_path / "b.dacp"
        save_checkpoint(net, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_f32_weights_recovered_bit_exact(self, tmp_path, rng):
        net = f32_net(rng)
        path = tmp_path / "net.dacp"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
        assert [l.kind for l in back.layers] == [l.kind for l in net.layers]
        for i, w in net.weights.items():
            np.testing.assert_array_equal(back.weights[i], w)
        for i, b in net.biases.items():
            np.testing.assert_array_equal(back.biases[i], b)

    def test_header_layout(self, tmp_path, rng):
        net = make_toy_net(rng)
        path = tmp_path / "net.dacp"
        save_checkpoint(net, path)
        data = path.read_bytes()
        assert data[:4] == MAGIC == b"DACP"
        version, count = struct.unpack("<II", data[4:12])
        assert version == 1
        assert count == len(net.layers)

    def test_pruned_net_shapes_survive(self, tmp_path, rng):
        net = make_toy_net(rng, c1=4, c2=6)
        plan = compute_prune_plan(net, tau=0.0)
        plan.keep_filters[net.conv_indices()[0]] = (1, 3)
        pruned = apply_prune(net, resnet_union_adjust(plan, net))
        path = tmp_path / "pruned.dacp"
        save_checkpoint(pruned, path)
        back = load_checkpoint(path)
        i = net.conv_indices()[0]
        assert back.layers[i].shape == pruned.layers[i].shape
        assert back.weights[i].shape == (3, 3, 1, 2)
        x = rng.uniform(0, 1, size=(2, 8, 8, 1))
        np.testing.assert_allclose(back.logits(x),
                                   _to_f32_net(pruned).logits(x), atol=1e-12)

    def test_resnet_source_indices_survive(self, tmp_path):
        net = archs.build_network("resnet-mini", (8, 8, 1), 2, seed=4)
        path = tmp_path / "r.dacp"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
        for a, b in zip(net.layers, back.layers):
            assert a.kind == b.kind
            if a.kind == nn.RESIDUAL_ADD:
                assert a.source == b.source


def _to_f32_net(net):
    clone = net.copy()
    for i, w in clone.weights.items():
        clone.weights[i] = w.astype(np.float32).astype(np.float64)
    for i, b in clone.biases.items():
        clone.biases[i] = b.astype(np.float32).astype(np.float64)
    return clone


class TestFailureModes:
    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.dacp").write_bytes(b"NOPE" + b"\x00" * 100)
        with pytest.raises(CheckpointMagicError, match="bad magic"):
            load_checkpoint(tmp_path / "x.dacp")

    def test_version_mismatch(self, tmp_path):
        (tmp_path / "x.dacp").write_bytes(MAGIC + struct.pack("<II", 9, 0))
        with pytest.raises(CheckpointVersionError, match="version 9"):
            load_checkpoint(tmp_path / "x.dacp")

    def test_truncated_payload(self, tmp_path, rng):
        net = make_toy_net(rng)
        path = tmp_path / "x.dacp"
        save_checkpoint(net, path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(CheckpointTruncatedError, match="truncated"):
            load_checkpoint(path)

    def test_trailing_garbage(self, tmp_path, rng):
        net = make_toy_net(rng)
        path = tmp_path / "x.dacp"
        save_checkpoint(net, path)
        path.write_bytes(path.read_bytes() + b"\x00" * 3)
        with pytest.raises(CheckpointError, match="trailing"):
            load_checkpoint(path)

    def test_unsupported_conv_geometry(self, tmp_path):
        layers = [nn.conv(3, 3, 1, 2, stride=2, padding=0),
                  nn.LayerSpec(nn.FLATTEN), nn.dense(18, 2),
                  nn.LayerSpec(nn.SOFTMAX_CE_HEAD)]
        net = nn.Network(layers, seed=0)
        with pytest.raises(CheckpointError, match="stride"):
            save_checkpoint(net, tmp_path / "x.dacp")
