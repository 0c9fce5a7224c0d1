"""Prune plans, physical network rebuild, and FLOPs accounting.

A plan keeps, per conv layer, the filters whose 3D norm clears a threshold;
each successor conv then keeps exactly the input channels its producer kept.
Residual additions require both operands to expose the same channels, which
is enforced by replacing the keep sets of all conv layers feeding the same
addition with their union.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .engine import network as nn
from .errors import ShapeError
from .grouping import filter_3d_norms

MODE_MEAN_RELATIVE = "mean-relative"
MODE_ABSOLUTE = "absolute"

_INPUT = -1  # channel-identity token for the network input


@dataclass(frozen=True)
class PrunePlan:
    keep_filters: dict    # conv layer index -> sorted tuple of kept filters
    keep_channels: dict   # conv layer index -> sorted tuple of kept input channels
    threshold_rule: dict  # how the keeps were chosen

    def n_kept(self, layer):
        return len(self.keep_filters[layer])


def compute_prune_plan(net, tau, mode=MODE_MEAN_RELATIVE):
    """Keep filter j iff its 3D norm exceeds the layer threshold.

    mean-relative mode: threshold = tau * mean(norms of the layer), so layers
    with different weight scales prune comparably; absolute mode: threshold =
    tau. A layer that would lose every filter keeps its single largest one.
    """
    if mode == MODE_MEAN_RELATIVE and not 0 <= tau < 1:
        raise ValueError(f"tau must be in [0, 1) for mean-relative mode, got {tau}")
    if mode == MODE_ABSOLUTE and tau < 0:
        raise ValueError(f"absolute threshold must be >= 0, got {tau}")
    if mode not in (MODE_MEAN_RELATIVE, MODE_ABSOLUTE):
        raise ValueError(f"unknown threshold mode {mode!r}")
    conv_idx = net.conv_indices()
    if not conv_idx:
        raise ShapeError("network has no conv layers to prune")
    keep_filters = {}
    for i in conv_idx:
        norms = filter_3d_norms(net.weights[i], layer=i).norms
        threshold = tau * norms.mean() if mode == MODE_MEAN_RELATIVE else tau
        kept = np.flatnonzero(norms > threshold)
        if kept.size == 0:
            kept = np.array([int(norms.argmax())])
        keep_filters[i] = tuple(int(j) for j in kept)
    keep_channels = _derive_keep_channels(net, keep_filters)
    return PrunePlan(keep_filters=keep_filters, keep_channels=keep_channels,
                     threshold_rule={"mode": mode, "tau": tau})


def resnet_union_adjust(plan, net):
    """Union the keep sets of all conv layers joined by residual additions.

    Layers whose outputs meet at an addition (directly or through other
    additions and pass-through layers) form one group; every member keeps the
    union of the group's filters, and successor channel keeps are re-derived.
    """
    groups = _shared_channel_groups(net)
    keep_filters = dict(plan.keep_filters)
    for group in groups:
        convs = [t for t in group if t != _INPUT]
        if not convs:
            continue
        union = set()
        for i in convs:
            union.update(keep_filters[i])
        if _INPUT in group:
            # input channels cannot be pruned, so the whole group keeps all
            union.update(range(net.layers[convs[0]].shape.n))
        union = tuple(sorted(union))
        for i in convs:
            keep_filters[i] = union
    keep_channels = _derive_keep_channels(net, keep_filters)
    return PrunePlan(keep_filters=keep_filters, keep_channels=keep_channels,
                     threshold_rule=dict(plan.threshold_rule))


def apply_prune(net, plan):
    """Materialize the plan: physically shrink every conv (and the dense
    layer fed by the flattened conv output) to the kept indices."""
    _validate_plan(net, plan)
    out_keep, flat_info = _propagate(net, plan.keep_filters, strict=True)
    layers = []
    weights, biases = {}, {}
    for i, layer in enumerate(net.layers):
        spec = layer
        if layer.kind == nn.CONV2D:
            keep_c = list(plan.keep_channels[i])
            keep_n = list(plan.keep_filters[i])
            w = net.weights[i][:, :, keep_c, :][:, :, :, keep_n]
            spec = nn.conv(layer.shape.kh, layer.shape.kw, len(keep_c), len(keep_n),
                           stride=layer.stride, padding=layer.padding)
            weights[i] = w.copy()
        elif layer.kind == nn.DENSE:
            w = net.weights[i]
            info = flat_info.get(i)
            if info is not None:
                c_full, keep_c = info
                positions = layer.d_in // c_full
                rows = np.array([p * c_full + c for p in range(positions)
                                 for c in keep_c], dtype=int)
                w = w[rows, :]
                spec = nn.dense(len(rows), layer.d_out)
            weights[i] = w.copy()
            biases[i] = net.biases[i].copy()
        layers.append(spec)
    return nn.Network(layers, weights=weights, biases=biases, seed=net.seed)


def _validate_plan(net, plan):
    conv_idx = net.conv_indices()
    if sorted(plan.keep_filters) != conv_idx:
        raise ShapeError(f"plan covers layers {sorted(plan.keep_filters)} but "
                         f"network has conv layers {conv_idx}")
    for i in conv_idx:
        kept = plan.keep_filters[i]
        n = net.layers[i].shape.n
        if not kept:
            raise ShapeError(f"plan keeps no filters in conv layer {i}")
        if list(kept) != sorted(set(kept)) or kept[0] < 0 or kept[-1] >= n:
            raise ShapeError(f"plan keep_filters for layer {i} not a sorted "
                             f"subset of range({n}): {kept}")
    derived = _derive_keep_channels(net, plan.keep_filters)
    for i in conv_idx:
        if tuple(plan.keep_channels[i]) != tuple(derived[i]):
            raise ShapeError(f"plan keep_channels for layer {i} is "
                             f"{plan.keep_channels[i]} but its producer keeps "
                             f"{derived[i]}")


def _first_conv_channels(net):
    for layer in net.layers:
        if layer.kind == nn.CONV2D:
            return layer.shape.c
    raise ShapeError("network has no conv layers")


def _propagate(net, keep_filters, strict):
    """Walk the layer list tracking which channels each output keeps.

    Returns (out_keep per layer, {dense index: (full channel count, kept
    channels)} for dense layers fed through a flatten). With strict=True a
    residual addition whose operands keep different channels is an error;
    otherwise their union flows on.
    """
    input_keep = tuple(range(_first_conv_channels(net)))
    out_keep = [None] * len(net.layers)
    flat_info = {}
    prev = input_keep
    prev_c_full = _first_conv_channels(net)
    flat_pending = None
    for i, layer in enumerate(net.layers):
        k = layer.kind
        if k == nn.CONV2D:
            prev = keep_filters[i]
            prev_c_full = layer.shape.n
        elif k == nn.RESIDUAL_ADD:
            other = out_keep[layer.source]
            if strict and prev != other:
                raise ShapeError(
                    f"residual_add[{i}]: operands keep different channels "
                    f"{prev} vs {other}; run resnet_union_adjust first")
            prev = tuple(sorted(set(prev) | set(other)))
        elif k == nn.FLATTEN:
            flat_pending = (prev_c_full, prev)
        elif k == nn.DENSE:
            if flat_pending is not None and len(flat_pending[1]) < flat_pending[0]:
                flat_info[i] = flat_pending
            flat_pending = None
            prev = None
            prev_c_full = None
        out_keep[i] = prev
    return out_keep, flat_info


def _derive_keep_channels(net, keep_filters):
    out_keep, _ = _propagate(net, keep_filters, strict=False)
    keep_channels = {}
    input_keep = tuple(range(_first_conv_channels(net)))
    for i in net.conv_indices():
        keep_channels[i] = input_keep if i == 0 else out_keep[i - 1]
    return keep_channels


def _shared_channel_groups(net):
    """Sets of conv indices (plus _INPUT) whose output channels must match."""
    parent = {_INPUT: _INPUT}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        parent[find(a)] = find(b)

    tokens = []
    token = _INPUT
    for i, layer in enumerate(net.layers):
        k = layer.kind
        if k == nn.CONV2D:
            parent[i] = i
            token = i
        elif k == nn.RESIDUAL_ADD:
            union(token, tokens[layer.source])
            token = find(token)
        elif k == nn.DENSE:
            token = _INPUT  # channel identity ends here
        tokens.append(token)
    groups = {}
    for t in parent:
        groups.setdefault(find(t), set()).add(t)
    return [g for g in groups.values() if len(g) > 1 or _INPUT not in g]


# ---------------------------------------------------------------------------
# FLOPs and parameter accounting

FLOPS_CONVENTION = "multiply-accumulate = 2 FLOPs; pooling/activation excluded"


@dataclass
class LayerCount:
    layer: int
    kind: str
    flops_before: int
    flops_after: int
    params_before: int
    params_after: int


@dataclass
class FlopsReport:
    convention: str
    layers: list = field(default_factory=list)

    @property
    def total_flops_before(self):
        return sum(r.flops_before for r in self.layers)

    @property
    def total_flops_after(self):
        return sum(r.flops_after for r in self.layers)

    @property
    def total_params_before(self):
        return sum(r.params_before for r in self.layers)

    @property
    def total_params_after(self):
        return sum(r.params_after for r in self.layers)

    @property
    def pruned_flops_pct(self):
        before = self.total_flops_before
        if before == 0:
            return 0.0
        return 100.0 * (1.0 - self.total_flops_after / before)

    def to_dict(self):
        return {
            "convention": self.convention,
            "layers": [vars(r).copy() for r in self.layers],
            "total_flops_before": self.total_flops_before,
            "total_flops_after": self.total_flops_after,
            "total_params_before": self.total_params_before,
            "total_params_after": self.total_params_after,
            "pruned_flops_pct": self.pruned_flops_pct,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["layer", "flops_before", "flops_after",
                         "params_before", "params_after"])
        for r in self.layers:
            writer.writerow([r.layer, r.flops_before, r.flops_after,
                             r.params_before, r.params_after])
        return buf.getvalue()

    def summary(self):
        return f"Pruned FLOPs {self.pruned_flops_pct:.2f}%"


def _layer_counts(net, input_hw):
    h, w = input_hw
    shapes = nn.infer_shapes(net.layers, (h, w, _first_conv_channels(net)))
    counts = []
    for i, layer in enumerate(net.layers):
        flops = params = 0
        if layer.kind == nn.CONV2D:
            kh, kw, c, n = layer.shape
            oh, ow, _ = shapes[i]
            flops = 2 * kh * kw * c * n * oh * ow
            params = kh * kw * c * n
        elif layer.kind == nn.DENSE:
            flops = 2 * layer.d_in * layer.d_out
            params = layer.d_in * layer.d_out + layer.d_out
        counts.append((i, layer.kind, flops, params))
    return counts


def count_flops(net, input_hw, baseline=None):
    """FLOPs/params per layer for `net`, compared against `baseline`.

    With no baseline the network is compared against itself (0% pruned).
    Baseline must have the same layer list structure, as apply_prune
    guarantees.
    """
    after = _layer_counts(net, input_hw)
    before = after if baseline is None else _layer_counts(baseline, input_hw)
    if [r[:2] for r in before] != [r[:2] for r in after]:
        raise ShapeError("baseline layer structure does not match the network")
    report = FlopsReport(convention=FLOPS_CONVENTION)
    for (i, kind, fb, pb), (_, _, fa, pa) in zip(before, after):
        report.layers.append(LayerCount(layer=i, kind=kind,
                                        flops_before=fb, flops_after=fa,
                                        params_before=pb, params_after=pa))
    return report
