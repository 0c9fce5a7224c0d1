"""Diagnostics: per-layer similarity statistics, clustering of channel and
filter vectors in a 2D (norm, similarity-to-mean) feature space, and
feature-map dumps as PGM tiles.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import network as nn
from .errors import ShapeError
from .grouping import channel_vectors, pairwise_similarity_matrix
from .pgm import write_pgm
from .similarity import angular_similarity


# ---------------------------------------------------------------------------
# connectivity power: mean pairwise angular similarity per layer

def _mean_pair_similarity(cv, axis):
    mat = pairwise_similarity_matrix(cv, metric="angular", axis=axis)
    m = mat.shape[0]
    return float((mat.sum() - np.trace(mat)) / (m * (m - 1)))


def connectivity_power(cv):
    """(channel_cp, filter_cp): mean off-diagonal angular similarity."""
    if cv.n_channels < 2 or cv.n_filters < 2:
        raise ShapeError(f"layer {cv.layer}: connectivity power needs >= 2 "
                         f"channels and filters, got {cv.matrix.shape}")
    return (_mean_pair_similarity(cv, "channels"),
            _mean_pair_similarity(cv, "filters"))


@dataclass
class ConnectivityReport:
    """One row per conv layer; degenerate axes (a single vector) hold None."""

    rows: list = field(default_factory=list)  # (layer, channel_cp, filter_cp)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["layer", "channel_cp", "filter_cp"])
        for layer, ccp, fcp in self.rows:
            writer.writerow([layer,
                             "" if ccp is None else repr(ccp),
                             "" if fcp is None else repr(fcp)])
        return buf.getvalue()

    def to_dict(self):
        return {"rows": [{"layer": l, "channel_cp": c, "filter_cp": f}
                         for l, c, f in self.rows]}

    def mean_channel_cp(self):
        values = [c for _, c, _ in self.rows if c is not None]
        return float(np.mean(values)) if values else None


def connectivity_report(net):
    report = ConnectivityReport()
    for i in net.conv_indices():
        cv = channel_vectors(net.weights[i], layer=i)
        ccp = _mean_pair_similarity(cv, "channels") if cv.n_channels >= 2 else None
        fcp = _mean_pair_similarity(cv, "filters") if cv.n_filters >= 2 else None
        report.rows.append((i, ccp, fcp))
    return report


# ---------------------------------------------------------------------------
# clustering in the standardized (norm, similarity-to-mean) plane

@dataclass
class ClusterReport:
    layer: int
    axis: str
    points: np.ndarray        # (m, 2) standardized to [0, 1]^2
    assignments: np.ndarray   # (m,) cluster index per point
    centers: np.ndarray       # (k, 2)
    n_clusters: int
    objective_history: list   # within-cluster sum of squares per iteration

    def csv_rows(self):
        rows = []
        for idx, (p, a) in enumerate(zip(self.points, self.assignments)):
            rows.append([self.layer, self.axis, "point", idx,
                         repr(float(p[0])), repr(float(p[1])), int(a)])
        for k, c in enumerate(self.centers):
            rows.append([self.layer, self.axis, "center", k,
                         repr(float(c[0])), repr(float(c[1])), k])
        return rows


CLUSTER_CSV_HEADER = ["layer", "axis", "kind", "index",
                      "distance_norm", "as_to_mean", "cluster"]


def clusters_to_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CLUSTER_CSV_HEADER)
    for report in reports:
        writer.writerows(report.csv_rows())
    return buf.getvalue()


def _minmax(column):
    lo, hi = column.min(), column.max()
    if hi - lo <= 1e-300:
        return np.full_like(column, 0.5)  # constant feature
    return (column - lo) / (hi - lo)


def cluster_features(cv, axis="channels"):
    """Standardized (vector norm, angular similarity to the mean vector)."""
    vectors = cv.vectors(axis)
    base = vectors.mean(axis=0)
    norms = np.linalg.norm(vectors, axis=1)
    sims = np.array([angular_similarity(v, base) for v in vectors])
    return np.column_stack([_minmax(norms), _minmax(sims)])


def cluster_channels(cv, axis="channels", k=2, seed=0):
    """Lloyd k-means over the 2D features, farthest-point initialized."""
    points = cluster_features(cv, axis)
    m = points.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    centers = _farthest_point_init(points, k, seed)
    if k > 1 and np.unique(centers, axis=0).shape[0] < k:
        warnings.warn(f"layer {cv.layer}: duplicate k-means centers "
                      f"(identical points)", RuntimeWarning, stacklevel=2)
    assignments = None
    history = []
    for _ in range(100):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignments = d2.argmin(axis=1)
        history.append(float(d2[np.arange(m), new_assignments].sum()))
        for j in range(k):
            member = new_assignments == j
            if member.any():
                centers[j] = points[member].mean(axis=0)
        if assignments is not None and (new_assignments == assignments).all():
            break
        assignments = new_assignments
    return ClusterReport(layer=cv.layer, axis=axis, points=points,
                         assignments=assignments, centers=centers,
                         n_clusters=k, objective_history=history)


def _farthest_point_init(points, k, seed):
    rng = np.random.default_rng(seed)
    m = points.shape[0]
    centers = [points[int(rng.integers(m))]]
    while len(centers) < k:
        d2 = np.min([((points - c) ** 2).sum(axis=1) for c in centers], axis=0)
        centers.append(points[int(d2.argmax())])
    return np.array(centers, dtype=np.float64)


# ---------------------------------------------------------------------------
# feature-map export

def export_feature_maps(net, image, layer, out_dir):
    """Dump each output channel of `layer` as a PGM tile plus a grid montage.

    Tiles are min-max normalized individually; channels that are constant
    (cut-off filters produce all-zero maps) render fully black. Returns the
    written paths, grid last.
    """
    if net.layers[layer].kind != nn.CONV2D:
        raise ShapeError(f"layer {layer} is {net.layers[layer].kind}, not conv2d")
    x = np.asarray(image, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    _, acts = net.forward(x)
    maps = acts[layer][0]  # (h, w, n)
    h, w, n = maps.shape
    tiles = np.zeros((n, h, w))
    for ch in range(n):
        tile = maps[:, :, ch]
        lo, hi = tile.min(), tile.max()
        if hi - lo > 1e-300:
            tiles[ch] = (tile - lo) / (hi - lo)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for ch in range(n):
        path = out / f"{layer}_{ch}.pgm"
        write_pgm(path, tiles[ch])
        paths.append(path)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    grid = np.zeros((rows * h, cols * w))
    for ch in range(n):
        r, c = divmod(ch, cols)
        grid[r * h:(r + 1) * h, c * w:(c + 1) * w] = tiles[ch]
    grid_path = out / f"{layer}_grid.pgm"
    write_pgm(grid_path, grid)
    paths.append(grid_path)
    return paths
