"""The three-phase pruning schedule and its run report.

Phase 1 trains under the Group-LASSO penalty alone; phase 2 reduces that
penalty and adds the angle-dissimilarity term; phase 3 prunes filters by
3D norm (with the residual union fix) and optionally fine-tunes the pruned
network. Phase transitions only change the penalty coefficients fed to the
optimizer, never the weights.

Training is plain SGD with a momentum buffer (momentum is an engine choice,
not part of the pruning method) under per-epoch cosine learning-rate decay.
Given one seed, the whole pipeline is deterministic: weight init, data
order, and augmentation draw from generators derived from that seed.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import connectivity_report
from .archs import build_network
from .checkpoint import save_checkpoint
from .datasets import load_dataset
from .engine import network as nn
from .errors import DivergenceError
from .penalties import evaluate_penalties
from .pruning import apply_prune, compute_prune_plan, count_flops, resnet_union_adjust


def cosine_lr(epoch, total, lr_max, lr_min):
    """lr_min + (lr_max - lr_min) (1 + cos(pi epoch/total)) / 2."""
    if total < 1:
        raise ValueError(f"total epochs must be >= 1, got {total}")
    if not 0 <= epoch <= total:
        raise ValueError(f"epoch {epoch} outside [0, {total}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * epoch / total))


# ---------------------------------------------------------------------------
# augmentation: pad-4 random crop plus random horizontal mirror

def mirror(image):
    return image[:, ::-1, :]


def pad_crop(image, offset_y, offset_x, pad=4):
    h, w, _ = image.shape
    padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)))
    return padded[offset_y:offset_y + h, offset_x:offset_x + w, :]


def augment(image, rng, pad=4):
    """Random crop of the zero-padded image, mirrored with probability 1/2."""
    offset_y = int(rng.integers(0, 2 * pad + 1))
    offset_x = int(rng.integers(0, 2 * pad + 1))
    out = pad_crop(image, offset_y, offset_x, pad)
    if rng.random() < 0.5:
        out = mirror(out)
    return out


# ---------------------------------------------------------------------------
# run report

@dataclass
class EpochMetrics:
    epoch: int
    phase: int
    lr: float
    task_loss: float
    r_g: float
    r_c: float
    accuracy: float

    def to_dict(self):
        return vars(self).copy()


@dataclass
class RunReport:
    config: dict
    epochs: list = field(default_factory=list)
    flops: object = None            # FlopsReport
    connectivity: object = None     # ConnectivityReport of the pruned net
    penalties: object = None        # PenaltyBreakdown after phase 2
    baseline_accuracy: float = 0.0  # unpruned accuracy after phase 2
    pruned_accuracy: float = 0.0    # accuracy of the physically pruned net

    def summary(self):
        pct = self.flops.pruned_flops_pct if self.flops else 0.0
        return (f"Pruned FLOPs {pct:.2f}%, "
                f"accuracy {100.0 * self.pruned_accuracy:.2f}%")

    def to_dict(self):
        return {
            "config": self.config,
            "epochs": [m.to_dict() for m in self.epochs],
            "flops": self.flops.to_dict() if self.flops else None,
            "connectivity": self.connectivity.to_dict() if self.connectivity else None,
            "penalties": self.penalties.to_dict() if self.penalties else None,
            "baseline_accuracy": self.baseline_accuracy,
            "pruned_accuracy": self.pruned_accuracy,
            "summary": self.summary(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def epochs_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["epoch", "phase", "lr", "task_loss", "r_g", "r_c",
                         "accuracy"])
        for m in self.epochs:
            writer.writerow([m.epoch, m.phase, repr(m.lr), repr(m.task_loss),
                             repr(m.r_g), repr(m.r_c), repr(m.accuracy)])
        return buf.getvalue()


def evaluate_accuracy(net, x, y, batch=256):
    correct = 0
    for start in range(0, len(x), batch):
        logits = net.logits(x[start:start + batch])
        correct += int((logits.argmax(axis=1) == y[start:start + batch]).sum())
    return correct / len(x)


# ---------------------------------------------------------------------------
# training

def _train_epochs(net, x, y, test_x, test_y, cfg, pcfg, epochs, phase, rng,
                  velocity, report, lr_override=None):
    for epoch in epochs:
        lr = lr_override if lr_override is not None else cosine_lr(
            epoch, cfg.epochs, cfg.lr_max, cfg.lr_min)
        order = rng.permutation(len(x))
        batch_losses = []
        for start in range(0, len(order), cfg.batch):
            idx = order[start:start + cfg.batch]
            xb = x[idx]
            if cfg.augment:
                xb = np.stack([augment(img, rng) for img in xb])
            loss, grads, _ = net.loss_and_grads(xb, y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite task loss at epoch {epoch}")
            _, pgrads = evaluate_penalties(net.weights, pcfg)
            _momentum_step(net, grads, pgrads, velocity, cfg.momentum, lr)
            batch_losses.append(loss)
        breakdown, _ = evaluate_penalties(net.weights, pcfg)
        report.epochs.append(EpochMetrics(
            epoch=epoch, phase=phase, lr=float(lr),
            task_loss=float(np.mean(batch_losses)),
            r_g=breakdown.r_g, r_c=breakdown.r_c,
            accuracy=evaluate_accuracy(net, test_x, test_y)))


def _momentum_step(net, grads, pgrads, velocity, momentum, lr):
    merged = {}
    for i, g in grads.items():
        if isinstance(g, tuple):
            gw, gb = g
            gw = gw + pgrads.get(i, 0.0)
            vw = velocity.setdefault((i, "w"), np.zeros_like(gw))
            vb = velocity.setdefault((i, "b"), np.zeros_like(gb))
            vw *= momentum
            vw += gw
            vb *= momentum
            vb += gb
            merged[i] = (vw, vb)
        else:
            g = g + pgrads.get(i, 0.0)
            v = velocity.setdefault((i, "w"), np.zeros_like(g))
            v *= momentum
            v += g
            merged[i] = v
    nn.sgd_step(net, merged, lr)


def run_schedule(net, train, test, cfg, out_dir=None):
    """Run the three phases on `net` over in-memory (x, y) arrays.

    Trains `net` in place through phases 1 and 2, then returns the separate
    (pruned network, prune plan, run report). `test` may be None, in which
    case accuracies are measured on the training set. When out_dir is given,
    a checkpoint is written at each phase boundary.
    """
    x, y = train
    test_x, test_y = test if test is not None else train
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([cfg.seed, 1])
    report = RunReport(config=cfg.to_dict())
    velocity = {}

    p1 = cfg.phase1_epochs
    phase1_cfg = cfg.penalty.with_weights(lambda_ad=0.0)
    _train_epochs(net, x, y, test_x, test_y, cfg, phase1_cfg,
                  range(0, p1), 1, rng, velocity, report)
    if out is not None:
        save_checkpoint(net, out / "phase1.dacp")

    phase2_cfg = cfg.penalty.with_weights(
        beta_gl=cfg.penalty.beta_gl * cfg.beta_phase2_scale)
    _train_epochs(net, x, y, test_x, test_y, cfg, phase2_cfg,
                  range(p1, cfg.epochs), 2, rng, velocity, report)
    report.baseline_accuracy = evaluate_accuracy(net, test_x, test_y)
    report.penalties, _ = evaluate_penalties(net.weights, phase2_cfg)
    if out is not None:
        save_checkpoint(net, out / "phase2.dacp")

    plan = resnet_union_adjust(compute_prune_plan(net, cfg.tau), net)
    pruned = apply_prune(net, plan)
    if cfg.finetune_epochs:
        no_penalty = cfg.penalty.with_weights(lambda_ad=0.0, beta_gl=0.0)
        _train_epochs(pruned, x, y, test_x, test_y, cfg, no_penalty,
                      range(cfg.epochs, cfg.epochs + cfg.finetune_epochs), 3,
                      rng, {}, report, lr_override=cfg.lr_min)
    report.pruned_accuracy = evaluate_accuracy(pruned, test_x, test_y)
    report.flops = count_flops(pruned, x.shape[1:3], baseline=net)
    report.connectivity = connectivity_report(pruned)
    if out is not None:
        save_checkpoint(pruned, out / "pruned.dacp")
    return pruned, plan, report


def run_dacp_schedule(cfg, out_dir=None):
    """Load the configured dataset, build the arch, and run the schedule.

    When out_dir is given, also writes run_report.json, epochs.csv,
    flops.csv/json, and connectivity.csv next to the phase checkpoints.
    """
    data = load_dataset(cfg)
    net = build_network(cfg.arch, data.input_shape, data.n_classes, seed=cfg.seed)
    pruned, plan, report = run_schedule(
        net, (data.train_x, data.train_y), (data.test_x, data.test_y), cfg,
        out_dir=out_dir)
    if out_dir is not None:
        out = Path(out_dir)
        (out / "run_report.json").write_text(report.to_json())
        (out / "epochs.csv").write_text(report.epochs_csv())
        (out / "flops.json").write_text(report.flops.to_json())
        (out / "flops.csv").write_text(report.flops.to_csv())
        (out / "connectivity.csv").write_text(report.connectivity.to_csv())
    return pruned, plan, report
