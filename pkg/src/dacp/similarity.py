"""Cosine and angular similarity between vectors.

Angular similarity maps the angle between two vectors to [0, 1]:
1 for parallel, 0.5 for orthogonal, 0 for anti-parallel. A vector whose
norm is at or below `eps` is treated as orthogonal to everything:
cosine 0, angular 0.5, zero gradient. Pruned-to-zero channels therefore
never produce NaNs.
"""

import numpy as np

DEFAULT_EPS = 1e-12

# arccos turns an O(1e-16) rounding error in a cosine near +/-1 into an
# O(1e-8) error in the angle; cosines this close to the ends are snapped
# so exactly-parallel vectors give exactly 1.0 / 0.0.
COS_SNAP = 1e-12


def cosine_similarity(a, b, eps=DEFAULT_EPS):
    """dot(a, b) / (|a| |b|), clamped to [-1, 1]; 0 if either norm <= eps."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na <= eps or nb <= eps:
        return 0.0
    return float(np.clip(a.dot(b) / (na * nb), -1.0, 1.0))


def angular_similarity(a, b, eps=DEFAULT_EPS):
    """1 - angle(a, b)/pi, in [0, 1]; 0.5 if either vector is near zero."""
    return float(angular_from_cosine(cosine_similarity(a, b, eps)))


def cosine_matrix(vectors, eps=DEFAULT_EPS):
    """Pairwise cosine similarities of the rows of `vectors`.

    Returns (matrix, nonzero_mask). Entries involving a near-zero row are 0,
    which the angular transform then maps to 0.5.
    """
    v = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(v, axis=1)
    nonzero = norms > eps
    unit = np.where(nonzero[:, None], v / np.maximum(norms, eps)[:, None], 0.0)
    mat = np.clip(unit @ unit.T, -1.0, 1.0)
    return mat, nonzero


def angular_from_cosine(cos):
    """Elementwise map cos -> 1 - arccos(cos)/pi (cos already in [-1, 1])."""
    cos = np.asarray(cos, dtype=np.float64)
    s = 1.0 - np.arccos(cos) / np.pi
    s = np.where(cos >= 1.0 - COS_SNAP, 1.0, s)
    return np.where(cos <= -1.0 + COS_SNAP, 0.0, s)
