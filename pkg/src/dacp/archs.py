"""Desk-scale reference architectures.

All convs are 3x3, stride 1, same padding, bias-free; downsampling is done
by 2x2 max pooling so pruning only ever has to track conv filters.
"""

from .engine import network as nn
from .errors import ConfigError

ARCHS = ("toycnn", "vgg-mini", "resnet-mini")


def build_network(arch, input_shape, n_classes, seed=0):
    """Instantiate a named architecture for (h, w, c) inputs."""
    if arch == "toycnn":
        layers = _toycnn(input_shape, n_classes)
    elif arch == "vgg-mini":
        layers = _vgg_mini(input_shape, n_classes)
    elif arch == "resnet-mini":
        layers = _resnet_mini(input_shape, n_classes)
    else:
        raise ConfigError(f"unknown arch {arch!r}; choose from {ARCHS}")
    return nn.Network(layers, seed=seed)


def _dense_head(layers, input_shape, n_classes):
    flat = nn.infer_shapes(layers + [nn.LayerSpec(nn.FLATTEN)], input_shape)[-1][0]
    layers.append(nn.LayerSpec(nn.FLATTEN))
    layers.append(nn.dense(flat, n_classes))
    layers.append(nn.LayerSpec(nn.SOFTMAX_CE_HEAD))
    return layers


def _toycnn(input_shape, n_classes):
    c = input_shape[2]
    layers = [
        nn.conv(3, 3, c, 8, padding=1),
        nn.LayerSpec(nn.RELU),
        nn.LayerSpec(nn.MAXPOOL2),
        nn.conv(3, 3, 8, 16, padding=1),
        nn.LayerSpec(nn.RELU),
        nn.LayerSpec(nn.MAXPOOL2),
    ]
    return _dense_head(layers, input_shape, n_classes)


def _vgg_mini(input_shape, n_classes):
    c = input_shape[2]
    layers = []
    width = 8
    for block in range(3):
        layers.append(nn.conv(3, 3, c, width, padding=1))
        layers.append(nn.LayerSpec(nn.RELU))
        layers.append(nn.conv(3, 3, width, width, padding=1))
        layers.append(nn.LayerSpec(nn.RELU))
        layers.append(nn.LayerSpec(nn.MAXPOOL2))
        c, width = width, width * 2
    return _dense_head(layers, input_shape, n_classes)


def _resnet_mini(input_shape, n_classes, width=8, blocks=3):
    c = input_shape[2]
    layers = [
        nn.conv(3, 3, c, width, padding=1),
        nn.LayerSpec(nn.RELU),
    ]
    for _ in range(blocks):
        shortcut = len(layers) - 1  # output feeding this block
        layers.append(nn.conv(3, 3, width, width, padding=1))
        layers.append(nn.LayerSpec(nn.RELU))
        layers.append(nn.conv(3, 3, width, width, padding=1))
        layers.append(nn.LayerSpec(nn.RESIDUAL_ADD, source=shortcut))
        layers.append(nn.LayerSpec(nn.RELU))
    layers.append(nn.LayerSpec(nn.MAXPOOL2))
    return _dense_head(layers, input_shape, n_classes)
