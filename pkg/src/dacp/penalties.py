"""Regularization terms and their exact weight-space gradients.

Four penalties are supported: plain L1 and L2, Group LASSO over the
channel/filter slices of each conv tensor, and the angle-dissimilarity
(AD) penalty over channel vectors. The AD penalty sums pairwise angular
similarities, so minimizing it pushes channel vectors apart; its
"approximate" mode compares each channel vector against the layer's mean
vector instead of all pairs.

Gradients are exact: for nonzero groups/vectors they match central finite
differences of the corresponding value function. Two deliberate exceptions,
both counted in the returned PenaltyBreakdown:

- a group or vector with norm <= epsilon_norm contributes the subgradient 0;
- pairs with |cos| >= 1 - 1e-9 use the cosine-mode gradient (the angular
  map's derivative diverges there).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .grouping import ChannelVectorSet, channel_vectors
from .similarity import (
    DEFAULT_EPS,
    angular_from_cosine,
    angular_similarity,
    cosine_matrix,
    cosine_similarity,
)

AD_MODES = ("exact", "approximate")
AD_SCOPES = ("channels-only", "channels-and-filters")
AD_METRICS = ("angular", "cosine")

# |cos| at or beyond this falls back to the cosine-mode gradient
GRAD_GUARD = 1e-9


@dataclass(frozen=True)
class PenaltyConfig:
    """Coefficients and switches for the combined training penalty.

    Defaults are desk-scale values tuned on the synthetic task. The
    mean-vector approximation is the default AD mode: the exact pairwise
    gradient can only decorrelate channel vectors by pushing weight mass
    into dead filter coordinates, which undoes the norm collapse pruning
    relies on.
    """

    lambda_ad: float = 5e-4     # AD term weight
    beta_gl: float = 2e-2       # Group-LASSO term weight
    l1: float = 0.0
    l2: float = 0.0
    ad_scope: str = "channels-only"
    ad_mode: str = "approximate"
    ad_metric: str = "angular"
    epsilon_norm: float = DEFAULT_EPS

    def __post_init__(self):
        for name in ("lambda_ad", "beta_gl", "l1", "l2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.ad_scope not in AD_SCOPES:
            raise ConfigError(f"ad_scope must be one of {AD_SCOPES}, got {self.ad_scope!r}")
        if self.ad_mode not in AD_MODES:
            raise ConfigError(f"ad_mode must be one of {AD_MODES}, got {self.ad_mode!r}")
        if self.ad_metric not in AD_METRICS:
            raise ConfigError(f"ad_metric must be one of {AD_METRICS}, got {self.ad_metric!r}")
        if not 0 < self.epsilon_norm <= 1e-8:
            raise ConfigError(f"epsilon_norm must be in (0, 1e-8], got {self.epsilon_norm}")

    def with_weights(self, lambda_ad=None, beta_gl=None):
        return replace(self,
                       lambda_ad=self.lambda_ad if lambda_ad is None else lambda_ad,
                       beta_gl=self.beta_gl if beta_gl is None else beta_gl)


@dataclass
class PenaltyBreakdown:
    """Unweighted penalty values plus bookkeeping flags."""

    r_g: float = 0.0
    r_c: float = 0.0
    r_l1: float = 0.0
    r_l2: float = 0.0
    r_g_per_layer: dict = field(default_factory=dict)
    r_c_per_layer: dict = field(default_factory=dict)
    zero_vector_terms: int = 0
    guarded_pairs: int = 0

    def to_dict(self):
        return {
            "r_g": self.r_g,
            "r_c": self.r_c,
            "r_l1": self.r_l1,
            "r_l2": self.r_l2,
            "r_g_per_layer": {str(k): v for k, v in sorted(self.r_g_per_layer.items())},
            "r_c_per_layer": {str(k): v for k, v in sorted(self.r_c_per_layer.items())},
            "zero_vector_terms": self.zero_vector_terms,
            "guarded_pairs": self.guarded_pairs,
        }


# ---------------------------------------------------------------------------
# simple elementwise penalties

def l1_penalty(w):
    return float(np.abs(w).sum()), np.sign(w)


def l2_penalty(w):
    return float((w ** 2).sum()), 2.0 * w


# ---------------------------------------------------------------------------
# Group LASSO

def group_lasso_penalty(weights, eps=DEFAULT_EPS):
    """Sum of L2 norms of every channel slice and filter slice.

    `weights` is one 4D conv tensor or a sequence of them. Returns
    (value, grads) with grads matching the input structure. The gradient of
    each group is w_g / |w_g|; groups with norm <= eps get 0.
    """
    single = isinstance(weights, np.ndarray)
    layers = [weights] if single else list(weights)
    value = 0.0
    grads = []
    for w in layers:
        v, g = _group_lasso_layer(np.asarray(w, dtype=np.float64), eps)
        value += v
        grads.append(g)
    return value, (grads[0] if single else grads)


def _group_lasso_layer(w, eps):
    ch_norms = np.sqrt((w ** 2).sum(axis=(0, 1, 3)))   # (c,) channel slices
    fl_norms = np.sqrt((w ** 2).sum(axis=(0, 1, 2)))   # (n,) filter slices
    value = float(ch_norms.sum() + fl_norms.sum())
    ch_inv = np.where(ch_norms > eps, 1.0 / np.maximum(ch_norms, eps), 0.0)
    fl_inv = np.where(fl_norms > eps, 1.0 / np.maximum(fl_norms, eps), 0.0)
    grad = w * ch_inv[None, None, :, None] + w * fl_inv[None, None, None, :]
    return value, grad


# ---------------------------------------------------------------------------
# AD penalty: values

def ad_penalty_exact(cvs, scope="channels-only", metric="angular", eps=DEFAULT_EPS):
    """Sum over layers of all pairwise similarities between channel vectors.

    With scope channels-and-filters the same pair sum over filter vectors is
    added. Layers with a single vector along an axis contribute 0 there.
    """
    total = 0.0
    for cv in _as_cv_list(cvs):
        total += _pair_sum(cv.matrix, metric, eps)
        if scope == "channels-and-filters":
            total += _pair_sum(cv.matrix.T, metric, eps)
    return total


def ad_penalty_approx(cvs, scope="channels-only", metric="angular", eps=DEFAULT_EPS):
    """Sum over layers of similarities between each vector and the mean vector."""
    total = 0.0
    for cv in _as_cv_list(cvs):
        total += _mean_sum(cv.matrix, metric, eps)
        if scope == "channels-and-filters":
            total += _mean_sum(cv.matrix.T, metric, eps)
    return total


def _as_cv_list(cvs):
    if isinstance(cvs, ChannelVectorSet):
        return [cvs]
    return list(cvs)


def _pair_sum(vectors, metric, eps):
    if vectors.shape[0] < 2:
        return 0.0
    cos, _ = cosine_matrix(vectors, eps)
    s = angular_from_cosine(cos) if metric == "angular" else cos
    return float((s.sum() - np.trace(s)) / 2.0)


def _mean_sum(vectors, metric, eps):
    m = vectors.shape[0]
    base = vectors.mean(axis=0)
    if np.linalg.norm(base) <= eps:
        return 0.5 * m if metric == "angular" else 0.0
    f = np.array([cosine_similarity(v, base, eps) for v in vectors])
    s = angular_from_cosine(f) if metric == "angular" else f
    return float(s.sum())


# ---------------------------------------------------------------------------
# AD penalty: gradients

def ad_penalty_gradient(weights, cfg):
    """Gradient of the configured AD penalty w.r.t. raw conv weights.

    `weights` is one 4D tensor or a sequence; returns matching structure.
    The chain runs through the kernel-norm matrix X[i, j] = |W[:,:,i,j]|_F,
    whose derivative is W_ij / X_ij (0 for kernels with norm <= eps).
    """
    single = isinstance(weights, np.ndarray)
    layers = [weights] if single else list(weights)
    grads = [_ad_layer_grad(np.asarray(w, dtype=np.float64), cfg)[1] for w in layers]
    return grads[0] if single else grads


def _ad_layer_grad(w, cfg):
    """(value, grad_w, zero_terms, guarded_pairs) of the AD term for one layer."""
    x = channel_vectors(w).matrix
    axis_fn = _ad_axis_exact if cfg.ad_mode == "exact" else _ad_axis_approx
    value, gx, zeros, guarded = axis_fn(x, cfg.ad_metric, cfg.epsilon_norm)
    if cfg.ad_scope == "channels-and-filters":
        v2, g2, z2, gd2 = axis_fn(x.T, cfg.ad_metric, cfg.epsilon_norm)
        value += v2
        gx = gx + g2.T
        zeros += z2
        guarded += gd2
    scale = np.where(x > cfg.epsilon_norm, 1.0 / np.maximum(x, cfg.epsilon_norm), 0.0)
    grad_w = w * (gx * scale)[None, None, :, :]
    return value, grad_w, zeros, guarded


def _ds_dcos(cos, metric, active):
    """Per-pair dS/dcos. Guarded pairs use the cosine-mode slope 1."""
    if metric == "cosine":
        ds = np.where(active, 1.0, 0.0)
        return ds, np.zeros(cos.shape, dtype=bool)
    near = np.abs(cos) >= 1.0 - GRAD_GUARD
    safe = np.where(near, 0.0, cos)
    ds = np.where(near, 1.0, 1.0 / (np.pi * np.sqrt(1.0 - safe ** 2)))
    ds = np.where(active, ds, 0.0)
    return ds, near & active


def _ad_axis_exact(x, metric, eps):
    """Value and dvalue/dx of the pairwise sum over the rows of x."""
    m = x.shape[0]
    if m < 2:
        return 0.0, np.zeros_like(x), 0, 0
    cos, nonzero = cosine_matrix(x, eps)
    s = angular_from_cosine(cos) if metric == "angular" else cos
    value = float((s.sum() - np.trace(s)) / 2.0)

    pair_ok = nonzero[:, None] & nonzero[None, :]
    ds, guarded = _ds_dcos(cos, metric, pair_ok)
    np.fill_diagonal(ds, 0.0)
    norms = np.linalg.norm(x, axis=1)
    unit = np.where(nonzero[:, None], x / np.maximum(norms, eps)[:, None], 0.0)
    # dvalue/dx_i = sum_j ds_ij (unit_j - cos_ij unit_i) / |x_i|
    grad = ds @ unit - ((ds * cos).sum(axis=1))[:, None] * unit
    grad = np.where(nonzero[:, None], grad / np.maximum(norms, eps)[:, None], 0.0)

    triu = np.triu_indices(m, k=1)
    zero_terms = int((~pair_ok[triu]).sum())
    return value, grad, zero_terms, int(guarded[triu].sum())


def _ad_axis_approx(x, metric, eps):
    """Value and dvalue/dx of the sum of similarities to the mean vector.

    The gradient includes both the direct term and the path through the
    mean vector itself, so finite differences of the value match it.
    """
    m = x.shape[0]
    base = x.mean(axis=0)
    rb = np.linalg.norm(base)
    if rb <= eps:
        value = 0.5 * m if metric == "angular" else 0.0
        return value, np.zeros_like(x), m, 0
    bhat = base / rb
    norms = np.linalg.norm(x, axis=1)
    nonzero = norms > eps
    unit = np.where(nonzero[:, None], x / np.maximum(norms, eps)[:, None], 0.0)
    f = np.clip(unit @ bhat, -1.0, 1.0)
    f = np.where(nonzero, f, 0.0)
    s = angular_from_cosine(f) if metric == "angular" else f
    s = np.where(nonzero, s, 0.5 if metric == "angular" else 0.0)
    value = float(s.sum())

    ds, guarded = _ds_dcos(f, metric, nonzero)
    direct = ds[:, None] * (bhat[None, :] - f[:, None] * unit)
    direct = np.where(nonzero[:, None],
                      direct / np.maximum(norms, eps)[:, None], 0.0)
    # every row moves the mean vector by 1/m
    grad_base = (ds[:, None] * (unit - f[:, None] * bhat[None, :])).sum(axis=0) / rb
    grad = direct + grad_base[None, :] / m
    return value, grad, int((~nonzero).sum()), int(guarded.sum())


# ---------------------------------------------------------------------------
# combined evaluation

def evaluate_penalties(weights, cfg):
    """All configured penalty terms over a {layer index: array} mapping.

    4D entries get the Group-LASSO and AD treatment; every entry gets the
    l1/l2 terms. Returns (PenaltyBreakdown, grads) where grads holds the
    coefficient-weighted gradient sum per layer, summation running in layer
    index order so results are deterministic.
    """
    breakdown = PenaltyBreakdown()
    grads = {}
    for i in sorted(weights):
        w = np.asarray(weights[i], dtype=np.float64)
        g = np.zeros_like(w)
        if w.ndim == 4:
            gl_value, gl_grad = _group_lasso_layer(w, cfg.epsilon_norm)
            ad_value, ad_grad, zeros, guarded = _ad_layer_grad(w, cfg)
            breakdown.r_g += gl_value
            breakdown.r_c += ad_value
            breakdown.r_g_per_layer[i] = gl_value
            breakdown.r_c_per_layer[i] = ad_value
            breakdown.zero_vector_terms += zeros
            breakdown.guarded_pairs += guarded
            if cfg.beta_gl:
                g += cfg.beta_gl * gl_grad
            if cfg.lambda_ad:
                g += cfg.lambda_ad * ad_grad
        if cfg.l1:
            v1, g1 = l1_penalty(w)
            breakdown.r_l1 += v1
            g += cfg.l1 * g1
        if cfg.l2:
            v2, g2 = l2_penalty(w)
            breakdown.r_l2 += v2
            g += cfg.l2 * g2
        grads[i] = g
    return breakdown, grads


def total_loss(task_loss, breakdown, cfg):
    """task + lambda_ad * r_c + beta_gl * r_g (+ l1/l2 terms when configured)."""
    return (task_loss
            + cfg.lambda_ad * breakdown.r_c
            + cfg.beta_gl * breakdown.r_g
            + cfg.l1 * breakdown.r_l1
            + cfg.l2 * breakdown.r_l2)


__all__ = [
    "AD_MODES", "AD_SCOPES", "AD_METRICS", "PenaltyConfig", "PenaltyBreakdown",
    "cosine_similarity", "angular_similarity", "l1_penalty", "l2_penalty",
    "group_lasso_penalty", "ad_penalty_exact", "ad_penalty_approx",
    "ad_penalty_gradient", "evaluate_penalties", "total_loss",
]
