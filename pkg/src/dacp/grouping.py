"""Vector views of 4D conv weights.

A conv weight tensor (kh, kw, c, n) is summarized by the c x n matrix of
per-kernel Frobenius norms. Its rows are the channel vectors (one entry per
filter), its columns the filter vectors; the n-length vector of whole-slice
norms over (kh, kw, c) gives the 3D-filter norms used for pruning.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .similarity import DEFAULT_EPS, angular_from_cosine, cosine_matrix

AXIS_CHANNELS = "channels"
AXIS_FILTERS = "filters"


@dataclass(frozen=True)
class ChannelVectorSet:
    """Per-layer kernel-norm matrix; entry (i, j) = |W[:, :, i, j]|_F."""

    layer: int
    matrix: np.ndarray  # (c, n), all entries >= 0

    @property
    def n_channels(self):
        return self.matrix.shape[0]

    @property
    def n_filters(self):
        return self.matrix.shape[1]

    def vectors(self, axis=AXIS_CHANNELS):
        if axis == AXIS_CHANNELS:
            return self.matrix
        if axis == AXIS_FILTERS:
            return self.matrix.T
        raise ValueError(f"axis must be 'channels' or 'filters', got {axis!r}")


@dataclass(frozen=True)
class FilterNormSet:
    """Per-layer L2 norms of each 3D filter (all kh*kw*c weights)."""

    layer: int
    norms: np.ndarray  # (n,)


def _require_conv(w):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 4:
        raise ShapeError(f"expected a 4D conv weight tensor, got shape {w.shape}")
    return w


def channel_vectors(w, layer=0):
    w = _require_conv(w)
    matrix = np.sqrt((w ** 2).sum(axis=(0, 1)))
    return ChannelVectorSet(layer=layer, matrix=matrix)


def filter_3d_norms(w, layer=0):
    w = _require_conv(w)
    return FilterNormSet(layer=layer, norms=np.sqrt((w ** 2).sum(axis=(0, 1, 2))))


def mean_vector(cv):
    """Arithmetic mean of the channel vectors (rows)."""
    return cv.matrix.mean(axis=0)


def pairwise_similarity_matrix(cv, metric="angular", axis=AXIS_CHANNELS,
                               eps=DEFAULT_EPS):
    """Symmetric similarity matrix between the vectors along `axis`."""
    vectors = cv.vectors(axis)
    if vectors.shape[0] < 2:
        raise ShapeError(f"need >= 2 {axis} for a similarity matrix, "
                         f"got {vectors.shape[0]}")
    cos, _ = cosine_matrix(vectors, eps)
    if metric == "cosine":
        return cos
    if metric == "angular":
        return angular_from_cosine(cos)
    raise ValueError(f"metric must be 'cosine' or 'angular', got {metric!r}")
