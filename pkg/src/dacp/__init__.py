"""Structured channel pruning for small CNNs.

Trains compact convolutional networks under a Group-LASSO penalty plus an
angle-dissimilarity penalty that pushes channel vectors apart, prunes
filters by 3D norm, and reports the FLOPs/accuracy trade-off along with
similarity diagnostics.
"""

from .analysis import (
    ClusterReport,
    ConnectivityReport,
    cluster_channels,
    connectivity_power,
    connectivity_report,
    export_feature_maps,
)
from .archs import build_network
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config, parse_config_text
from .datasets import Dataset, load_dataset, synthetic_bars
from .engine import LayerSpec, Network, Shape4, sgd_step
from .errors import DacpError
from .estimator import DACPClassifier
from .grouping import (
    ChannelVectorSet,
    FilterNormSet,
    channel_vectors,
    filter_3d_norms,
    mean_vector,
    pairwise_similarity_matrix,
)
from .penalties import (
    PenaltyBreakdown,
    PenaltyConfig,
    ad_penalty_approx,
    ad_penalty_exact,
    ad_penalty_gradient,
    angular_similarity,
    cosine_similarity,
    evaluate_penalties,
    group_lasso_penalty,
    total_loss,
)
from .pruning import (
    FlopsReport,
    PrunePlan,
    apply_prune,
    compute_prune_plan,
    count_flops,
    resnet_union_adjust,
)
from .schedule import RunReport, augment, cosine_lr, run_dacp_schedule, run_schedule

__version__ = "0.1.0"

__all__ = [
    "DACPClassifier", "Network", "LayerSpec", "Shape4", "Dataset",
    "ExperimentConfig", "PenaltyConfig", "PenaltyBreakdown", "PrunePlan",
    "FlopsReport", "RunReport", "ChannelVectorSet", "FilterNormSet",
    "ClusterReport", "ConnectivityReport", "DacpError",
    "build_network", "load_dataset", "synthetic_bars", "load_config",
    "parse_config_text", "save_checkpoint", "load_checkpoint",
    "cosine_similarity", "angular_similarity", "group_lasso_penalty",
    "ad_penalty_exact", "ad_penalty_approx", "ad_penalty_gradient",
    "evaluate_penalties", "total_loss", "channel_vectors", "filter_3d_norms",
    "mean_vector", "pairwise_similarity_matrix", "compute_prune_plan",
    "resnet_union_adjust", "apply_prune", "count_flops", "connectivity_power",
    "connectivity_report", "cluster_channels", "export_feature_maps",
    "cosine_lr", "augment", "run_schedule", "run_dacp_schedule", "sgd_step",
]
