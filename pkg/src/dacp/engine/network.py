"""Layer graph: specs, weight init, forward/backward, SGD update.

A Network is an ordered list of LayerSpec. Each layer consumes the previous
layer's output; a residual_add layer additionally consumes the output of an
earlier layer (its `source`). The last layer must be the single
softmax_ce_head, which turns the preceding logits into a loss.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import DivergenceError, ShapeError
from . import ops

CONV2D = "conv2d"
DENSE = "dense"
RELU = "relu"
MAXPOOL2 = "maxpool2"
FLATTEN = "flatten"
RESIDUAL_ADD = "residual_add"
SOFTMAX_CE_HEAD = "softmax_ce_head"

KINDS = (CONV2D, DENSE, RELU, MAXPOOL2, FLATTEN, RESIDUAL_ADD, SOFTMAX_CE_HEAD)


class Shape4(NamedTuple):
    """Conv weight dims: kernel height/width, input channels, filters."""

    kh: int
    kw: int
    c: int
    n: int


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    shape: Shape4 | None = None   # conv2d
    stride: int = 1               # conv2d
    padding: int = 0              # conv2d
    d_in: int = 0                 # dense
    d_out: int = 0                # dense
    source: int = -1              # residual_add: index of the shortcut layer

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.kind == CONV2D:
            if self.shape is None or min(self.shape) < 1:
                raise ShapeError(f"conv2d needs a positive Shape4, got {self.shape}")
        if self.kind == DENSE and (self.d_in < 1 or self.d_out < 1):
            raise ShapeError(f"dense needs positive sizes, got {self.d_in}x{self.d_out}")


def conv(kh, kw, c, n, stride=1, padding=0):
    return LayerSpec(CONV2D, shape=Shape4(kh, kw, c, n), stride=stride, padding=padding)


def dense(d_in, d_out):
    return LayerSpec(DENSE, d_in=d_in, d_out=d_out)


class Network:
    """Layer list plus per-layer parameters, with a deterministic init seed."""

    def __init__(self, layers, weights=None, biases=None, seed=0):
        layers = list(layers)
        _validate_layers(layers)
        self.layers = layers
        self.seed = seed
        if weights is None:
            weights, biases = _init_params(layers, seed)
        self.weights = weights          # {layer index: ndarray}
        self.biases = biases or {}      # {layer index: ndarray}, dense only

    # -- structure ---------------------------------------------------------

    def conv_indices(self):
        return [i for i, l in enumerate(self.layers) if l.kind == CONV2D]

    def copy(self):
        return Network(
            self.layers,
            weights={i: w.copy() for i, w in self.weights.items()},
            biases={i: b.copy() for i, b in self.biases.items()},
            seed=self.seed,
        )

    def num_params(self):
        n = sum(w.size for w in self.weights.values())
        return n + sum(b.size for b in self.biases.values())

    # -- execution ---------------------------------------------------------

    def forward(self, x):
        """Run all layers except the loss head; returns (logits, activations).

        activations[i] is the output of layer i; the head slot holds the
        logits again so residual sources can index any non-head layer.
        """
        acts = [None] * len(self.layers)
        cur = x
        for i, layer in enumerate(self.layers):
            k = layer.kind
            if k == CONV2D:
                cur = ops.conv2d_forward(cur, self.weights[i], layer.stride,
                                         layer.padding, layer=f"[{i}]")
            elif k == DENSE:
                cur = ops.dense_forward(cur, self.weights[i], self.biases[i])
            elif k == RELU:
                cur = ops.relu_forward(cur)
            elif k == MAXPOOL2:
                cur = ops.maxpool2_forward(cur)
            elif k == FLATTEN:
                cur = ops.flatten_forward(cur)
            elif k == RESIDUAL_ADD:
                shortcut = acts[layer.source]
                if shortcut.shape != cur.shape:
                    raise ShapeError(
                        f"residual_add[{i}]: operand shapes {cur.shape} vs "
                        f"{shortcut.shape} (source layer {layer.source})")
                cur = cur + shortcut
            acts[i] = cur
        return cur, acts

    def logits(self, x):
        return self.forward(x)[0]

    def loss_and_grads(self, x, labels):
        """Mean cross-entropy loss, gradient dict {layer: (gw[, gb])}, logits."""
        logits, acts = self.forward(x)
        loss, grad = ops.softmax_cross_entropy(logits, labels)
        grads = self.backward(x, acts, grad)
        return loss, grads, logits

    def backward(self, x, acts, grad_logits):
        """Backprop `grad_logits` through all non-head layers.

        `acts` must come from forward() on the same input x. Returns
        {layer index: grad_w} for conv layers and {index: (grad_w, grad_b)}
        for dense layers.
        """
        pending = [None] * len(self.layers)
        head = len(self.layers) - 1
        pending[head - 1] = grad_logits
        grads = {}
        for i in range(head - 1, -1, -1):
            g = pending[i]
            if g is None:
                continue
            layer = self.layers[i]
            inp = acts[i - 1] if i > 0 else x
            k = layer.kind
            if k == CONV2D:
                gx, gw = ops.conv2d_backward(g, inp, self.weights[i],
                                             layer.stride, layer.padding,
                                             layer=f"[{i}]")
                grads[i] = gw
            elif k == DENSE:
                gx, gw, gb = ops.dense_backward(g, inp, self.weights[i])
                grads[i] = (gw, gb)
            elif k == RELU:
                gx = ops.relu_backward(g, inp)
            elif k == MAXPOOL2:
                gx = ops.maxpool2_backward(g, inp)
            elif k == FLATTEN:
                gx = ops.flatten_backward(g, inp)
            elif k == RESIDUAL_ADD:
                gx = g
                src = layer.source
                pending[src] = g if pending[src] is None else pending[src] + g
            if i > 0:
                pending[i - 1] = gx if pending[i - 1] is None else pending[i - 1] + gx
        return grads


def _validate_layers(layers):
    if not layers or layers[-1].kind != SOFTMAX_CE_HEAD:
        raise ShapeError("network must end with a single softmax_ce_head layer")
    heads = [l for l in layers if l.kind == SOFTMAX_CE_HEAD]
    if len(heads) != 1:
        raise ShapeError(f"network must have exactly one softmax_ce_head, got {len(heads)}")
    for i, layer in enumerate(layers):
        if layer.kind == RESIDUAL_ADD and not 0 <= layer.source < i:
            raise ShapeError(f"residual_add[{i}]: source {layer.source} must be "
                             f"an earlier layer index")


def _init_params(layers, seed):
    """Uniform Glorot init, one rng draw sequence per network."""
    rng = np.random.default_rng(seed)
    weights, biases = {}, {}
    for i, layer in enumerate(layers):
        if layer.kind == CONV2D:
            kh, kw, c, n = layer.shape
            lim = np.sqrt(6.0 / (kh * kw * c + kh * kw * n))
            weights[i] = rng.uniform(-lim, lim, size=(kh, kw, c, n))
        elif layer.kind == DENSE:
            lim = np.sqrt(6.0 / (layer.d_in + layer.d_out))
            weights[i] = rng.uniform(-lim, lim, size=(layer.d_in, layer.d_out))
            biases[i] = np.zeros(layer.d_out)
    return weights, biases


def sgd_step(net, grads, lr):
    """In-place w <- w - lr * g for every parameter present in `grads`."""
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    for i, g in grads.items():
        if net.layers[i].kind == DENSE:
            gw, gb = g
            if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
                raise DivergenceError(f"non-finite gradient at dense layer {i}")
            net.weights[i] -= lr * gw
            net.biases[i] -= lr * gb
        else:
            if not np.isfinite(g).all():
                raise DivergenceError(f"non-finite gradient at conv layer {i}")
            net.weights[i] -= lr * g
    return net


def infer_shapes(layers, input_shape):
    """Output (h, w, c) or flat size per layer for a given input (h, w, c)."""
    shapes = []
    cur = tuple(input_shape)
    for i, layer in enumerate(layers):
        k = layer.kind
        if k == CONV2D:
            h, w, c = cur
            kh, kw, wc, n = layer.shape
            if c != wc:
                raise ShapeError(f"layer {i}: expects {wc} input channels, gets {c}")
            cur = ((h + 2 * layer.padding - kh) // layer.stride + 1,
                   (w + 2 * layer.padding - kw) // layer.stride + 1, n)
        elif k == MAXPOOL2:
            h, w, c = cur
            cur = (h // 2, w // 2, c)
        elif k == FLATTEN:
            h, w, c = cur
            cur = (h * w * c,)
        elif k == DENSE:
            if cur != (layer.d_in,):
                raise ShapeError(f"layer {i}: dense expects {layer.d_in} inputs, "
                                 f"gets {cur}")
            cur = (layer.d_out,)
        elif k == RESIDUAL_ADD:
            if shapes[layer.source] != cur:
                raise ShapeError(f"layer {i}: residual operands {cur} vs "
                                 f"{shapes[layer.source]}")
        shapes.append(cur)
    return shapes


__all__ = [
    "Shape4", "LayerSpec", "Network", "conv", "dense", "sgd_step",
    "infer_shapes", "CONV2D", "DENSE", "RELU", "MAXPOOL2", "FLATTEN",
    "RESIDUAL_ADD", "SOFTMAX_CE_HEAD", "KINDS",
]
