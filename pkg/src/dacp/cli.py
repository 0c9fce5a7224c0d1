"""Command-line interface: train / prune / analyze / flops / dump-features."""

import argparse
import json
import sys
from pathlib import Path

from .analysis import cluster_channels, clusters_to_csv, connectivity_report, export_feature_maps
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config
from .errors import DacpError
from .grouping import channel_vectors
from .pgm import read_pgm
from .pruning import apply_prune, compute_prune_plan, count_flops, resnet_union_adjust
from .schedule import run_dacp_schedule


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dacp",
        description="Structured channel pruning for small CNNs: Group-LASSO "
                    "training with an angle-dissimilarity penalty, filter-norm "
                    "pruning, and FLOPs/similarity reporting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the three-phase training schedule")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", default=None, help="directory for checkpoints and reports")

    p = sub.add_parser("prune", help="prune a checkpointed network by filter norm")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tau", type=float, required=True,
                   help="keep filters with norm > tau * mean layer norm")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="emit connectivity and cluster CSV reports")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", required=True, help="output directory")
    p.add_argument("--clusters", type=int, default=2, help="k for k-means")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("flops", help="print the FLOPs/params table")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input-hw", required=True, help="input size, e.g. 8x8")

    p = sub.add_parser("dump-features", help="write per-channel feature maps as PGM")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--image", required=True, help="input image (binary PGM)")
    p.add_argument("--out", required=True)
    return parser


def _cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    _, plan, report = run_dacp_schedule(cfg, out_dir=args.out)
    for m in report.epochs:
        print(f"epoch {m.epoch:3d} phase {m.phase} lr {m.lr:.5f} "
              f"loss {m.task_loss:.4f} r_g {m.r_g:.3f} r_c {m.r_c:.3f} "
              f"acc {100 * m.accuracy:.2f}%")
    print(report.summary())
    if args.out:
        print(f"artifacts written to {args.out}")


def _cmd_prune(args):
    net = load_checkpoint(args.checkpoint)
    plan = resnet_union_adjust(compute_prune_plan(net, args.tau), net)
    pruned = apply_prune(net, plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(pruned, out / "pruned.dacp")
    plan_dict = {
        "threshold_rule": plan.threshold_rule,
        "keep_filters": {str(k): list(v) for k, v in sorted(plan.keep_filters.items())},
        "keep_channels": {str(k): list(v) for k, v in sorted(plan.keep_channels.items())},
    }
    (out / "plan.json").write_text(json.dumps(plan_dict, indent=2, sort_keys=True))
    for i in sorted(plan.keep_filters):
        total = net.layers[i].shape.n
        print(f"conv {i}: kept {len(plan.keep_filters[i])}/{total} filters")
    print(f"pruned checkpoint and plan written to {out}")


def _cmd_analyze(args):
    net = load_checkpoint(args.checkpoint)
    out = Path(args.report)
    out.mkdir(parents=True, exist_ok=True)
    (out / "connectivity.csv").write_text(connectivity_report(net).to_csv())
    reports = []
    for i in net.conv_indices():
        cv = channel_vectors(net.weights[i], layer=i)
        for axis, count in (("channels", cv.n_channels), ("filters", cv.n_filters)):
            if count >= max(2, args.clusters):
                reports.append(cluster_channels(cv, axis=axis, k=args.clusters,
                                                seed=args.seed))
    (out / "clusters.csv").write_text(clusters_to_csv(reports))
    print(f"connectivity.csv and clusters.csv written to {out}")


def _cmd_flops(args):
    net = load_checkpoint(args.checkpoint)
    try:
        h, w = (int(part) for part in args.input_hw.lower().split("x"))
    except ValueError:
        raise DacpError(f"--input-hw must look like 8x8, got {args.input_hw!r}")
    report = count_flops(net, (h, w))
    print(f"# {report.convention}")
    print(report.to_csv(), end="")
    print(f"total FLOPs {report.total_flops_before}, "
          f"params {report.total_params_before}")


def _cmd_dump_features(args):
    net = load_checkpoint(args.checkpoint)
    image = read_pgm(args.image)[:, :, None]
    paths = export_feature_maps(net, image, args.layer, args.out)
    print(f"wrote {len(paths)} PGM files to {args.out}")


_COMMANDS = {
    "train": _cmd_train,
    "prune": _cmd_prune,
    "analyze": _cmd_analyze,
    "flops": _cmd_flops,
    "dump-features": _cmd_dump_features,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (DacpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
