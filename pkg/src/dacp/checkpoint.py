"""Binary network checkpoints.

Layout (all integers little-endian):

    magic  b"DACP"
    u32    version (= 1)
    u32    layer count
    per layer:
        u8      kind tag
        4 x u32 dims (meaning depends on kind, zero when unused)
        f32[]   weights in C order (so the filter index varies fastest)

Dims: conv2d (kh, kw, c, n) followed by kh*kw*c*n weight floats; dense
(d_in, d_out, 0, 0) followed by d_in*d_out weights then d_out biases;
residual_add (source, 0, 0, 0); other kinds all zero, no payload.

Version 1 stores no stride/padding, so it covers exactly the networks the
builders produce: stride-1 convs with same padding (padding = kh // 2).
Weights are stored as float32; loading promotes back to the engine's
float64, so save -> load -> save is byte-identical.
"""

import struct
from pathlib import Path

import numpy as np

from .engine import network as nn
from .errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)

MAGIC = b"DACP"
VERSION = 1

_KIND_TAGS = {
    nn.CONV2D: 1,
    nn.DENSE: 2,
    nn.RELU: 3,
    nn.MAXPOOL2: 4,
    nn.FLATTEN: 5,
    nn.RESIDUAL_ADD: 6,
    nn.SOFTMAX_CE_HEAD: 7,
}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


def save_checkpoint(net, path):
    chunks = [MAGIC, struct.pack("<II", VERSION, len(net.layers))]
    for i, layer in enumerate(net.layers):
        dims = (0, 0, 0, 0)
        payload = b""
        if layer.kind == nn.CONV2D:
            kh, kw, c, n = layer.shape
            if layer.stride != 1 or layer.padding != kh // 2:
                raise CheckpointError(
                    f"layer {i}: checkpoint v{VERSION} only stores stride-1 "
                    f"same-padding convs, got stride={layer.stride} "
                    f"padding={layer.padding}")
            dims = (kh, kw, c, n)
            payload = np.ascontiguousarray(net.weights[i], dtype="<f4").tobytes()
        elif layer.kind == nn.DENSE:
            dims = (layer.d_in, layer.d_out, 0, 0)
            payload = (np.ascontiguousarray(net.weights[i], dtype="<f4").tobytes()
                       + np.ascontiguousarray(net.biases[i], dtype="<f4").tobytes())
        elif layer.kind == nn.RESIDUAL_ADD:
            dims = (layer.source, 0, 0, 0)
        chunks.append(struct.pack("<BIIII", _KIND_TAGS[layer.kind], *dims))
        chunks.append(payload)
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}")
    if len(data) < 4 or data[:4] != MAGIC:
        raise CheckpointMagicError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 12:
        raise CheckpointTruncatedError(f"{path}: truncated header at byte {len(data)}")
    version, n_layers = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: version {version} not supported "
                                     f"(expected {VERSION})")
    pos = 12
    layers = []
    weights, biases = {}, {}
    for i in range(n_layers):
        if len(data) < pos + 17:
            raise CheckpointTruncatedError(f"{path}: truncated layer header for "
                                           f"layer {i} at byte {len(data)}")
        tag, d0, d1, d2, d3 = struct.unpack("<BIIII", data[pos:pos + 17])
        pos += 17
        kind = _TAG_KINDS.get(tag)
        if kind is None:
            raise CheckpointError(f"{path}: unknown layer kind tag {tag} "
                                  f"(layer {i}, byte {pos - 17})")
        if kind == nn.CONV2D:
            count = d0 * d1 * d2 * d3
            values, pos = _read_floats(data, pos, count, path, i)
            layers.append(nn.conv(d0, d1, d2, d3, stride=1, padding=d0 // 2))
            weights[i] = values.reshape(d0, d1, d2, d3)
        elif kind == nn.DENSE:
            values, pos = _read_floats(data, pos, d0 * d1 + d1, path, i)
            layers.append(nn.dense(d0, d1))
            weights[i] = values[:d0 * d1].reshape(d0, d1)
            biases[i] = values[d0 * d1:]
        elif kind == nn.RESIDUAL_ADD:
            layers.append(nn.LayerSpec(nn.RESIDUAL_ADD, source=d0))
        else:
            layers.append(nn.LayerSpec(kind))
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes at "
                              f"byte {pos}")
    return nn.Network(layers, weights=weights, biases=biases, seed=0)


def _read_floats(data, pos, count, path, layer):
    end = pos + 4 * count
    if len(data) < end:
        raise CheckpointTruncatedError(f"{path}: truncated payload for layer "
                                       f"{layer}: need {4 * count} bytes at byte "
                                       f"{pos}, file ends at {len(data)}")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
    return values.astype(np.float64), end
