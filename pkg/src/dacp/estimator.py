"""Scikit-learn estimator wrapper around the pruning pipeline.

DACPClassifier trains a small CNN on image batches under the Group-LASSO
plus angle-dissimilarity schedule, prunes it, and predicts with the pruned
network. It follows the sklearn contract (get_params/set_params, fit
returns self, fitted attributes carry a trailing underscore), so it
composes with model selection utilities out of the box.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .archs import build_network
from .config import ExperimentConfig
from .penalties import PenaltyConfig
from .schedule import run_schedule
from .validation import check_image_batch, check_labels


class DACPClassifier(ClassifierMixin, BaseEstimator):
    """CNN classifier trained with sparsity penalties and channel-pruned.

    Fitting runs the three-phase schedule (Group LASSO, then GL plus the
    angle-dissimilarity penalty, then filter-norm pruning); prediction uses
    the pruned network.

    Parameters
    ----------
    arch : {"toycnn", "vgg-mini", "resnet-mini"}
        Network template, instantiated for the input shape seen in fit.
    epochs, batch_size, lr_max, lr_min, momentum
        SGD budget: per-epoch cosine decay from lr_max to lr_min.
    lambda_ad, beta_gl, l1, l2 : float
        Penalty coefficients (angle-dissimilarity, Group LASSO, plain L1/L2).
    ad_mode : {"approximate", "exact"}
        Mean-vector approximation or the full pairwise similarity sum.
    tau : float
        Keep a filter iff its 3D norm exceeds tau * mean(layer norms).
    random_state : int
        Seeds weight init, data order, and augmentation; runs reproduce
        byte for byte.

    Attributes
    ----------
    classes_ : ndarray of the sorted class labels
    network_ : the pruned network used by predict
    prune_plan_ : kept filter/channel indices per conv layer
    run_report_ : per-epoch metrics plus FLOPs/connectivity reports
    input_shape_ : (h, w, c) the estimator was fitted on
    """

    def __init__(self, arch="toycnn", epochs=30, batch_size=32, lr_max=0.05,
                 lr_min=1e-3, momentum=0.9, lambda_ad=5e-4, beta_gl=2e-2,
                 l1=0.0, l2=0.0, ad_mode="approximate", ad_scope="channels-only",
                 ad_metric="angular", phase1_fraction=0.6,
                 beta_phase2_scale=0.5, tau=0.1, finetune_epochs=0,
                 augment=False, random_state=0):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.momentum = momentum
        self.lambda_ad = lambda_ad
        self.beta_gl = beta_gl
        self.l1 = l1
        self.l2 = l2
        self.ad_mode = ad_mode
        self.ad_scope = ad_scope
        self.ad_metric = ad_metric
        self.phase1_fraction = phase1_fraction
        self.beta_phase2_scale = beta_phase2_scale
        self.tau = tau
        self.finetune_epochs = finetune_epochs
        self.augment = augment
        self.random_state = random_state

    def _experiment_config(self):
        penalty = PenaltyConfig(
            lambda_ad=self.lambda_ad, beta_gl=self.beta_gl, l1=self.l1,
            l2=self.l2, ad_scope=self.ad_scope, ad_mode=self.ad_mode,
            ad_metric=self.ad_metric)
        return ExperimentConfig(
            arch=self.arch, epochs=self.epochs, batch=self.batch_size,
            seed=self.random_state, lr_max=self.lr_max, lr_min=self.lr_min,
            momentum=self.momentum, phase1_fraction=self.phase1_fraction,
            beta_phase2_scale=self.beta_phase2_scale, tau=self.tau,
            finetune_epochs=self.finetune_epochs, augment=self.augment,
            penalty=penalty)

    def fit(self, X, y):
        """Train on images X of shape (n, h, w, c) or (n, h, w)."""
        X = check_image_batch(X)
        self.classes_, encoded = check_labels(y, X.shape[0])
        cfg = self._experiment_config()
        net = build_network(self.arch, X.shape[1:], len(self.classes_),
                            seed=self.random_state)
        pruned, plan, report = run_schedule(net, (X, encoded), None, cfg)
        self.network_ = pruned
        self.prune_plan_ = plan
        self.run_report_ = report
        self.input_shape_ = X.shape[1:]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        X = check_image_batch(X)
        if X.shape[1:] != self.input_shape_:
            raise ValueError(f"X has shape {X.shape[1:]} per sample, the "
                             f"estimator was fitted on {self.input_shape_}")
        return self.network_.logits(X)

    def predict_proba(self, X):
        logits = self.decision_function(X)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[logits.argmax(axis=1)]

    @property
    def pruned_flops_pct_(self):
        check_is_fitted(self, "run_report_")
        return self.run_report_.flops.pruned_flops_pct
