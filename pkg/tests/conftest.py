"""Shared oracles: central finite differences and small network builders."""

import numpy as np
import pytest

from dacp.engine import network as nn


def central_diff_grad(f, x, h=1e-4):
    """Central-difference gradient of scalar f w.r.t. array x (in place probe)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = f(x)
        flat[k] = orig - h
        fm = f(x)
        flat[k] = orig
        gflat[k] = (fp - fm) / (2.0 * h)
    return grad


def rel_error(a, b):
    """Max absolute difference scaled by the larger magnitude of the pair."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / scale)


def make_toy_net(rng, in_c=1, c1=4, c2=6, hw=8, n_classes=3):
    """Small conv-conv-dense net with freshly drawn weights."""
    seed = int(rng.integers(0, 2 ** 31))
    layers = [
        nn.conv(3, 3, in_c, c1, padding=1),
        nn.LayerSpec(nn.RELU),
        nn.LayerSpec(nn.MAXPOOL2),
        nn.conv(3, 3, c1, c2, padding=1),
        nn.LayerSpec(nn.RELU),
        nn.LayerSpec(nn.MAXPOOL2),
        nn.LayerSpec(nn.FLATTEN),
        nn.dense((hw // 4) ** 2 * c2, n_classes),
        nn.LayerSpec(nn.SOFTMAX_CE_HEAD),
    ]
    return nn.Network(layers, seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
