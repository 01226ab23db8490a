"""Command-line entry points.

Subcommands: gen (write a dataset), train (fit one network on a stored
dataset), eval (score a checkpoint, optionally with TTA), exp (a full
day-based scenario), xval (stratified cross validation), viz (gradient
ascent on one filter).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ..cxnn import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
    visualize_filter,
)
from ..rng import keyed_rng
from ..signal import normalize_power_array
from .augment import AugmentationPolicy
from .augment import predict_tta_batch
from .dataset import DatasetManifest, generate_dataset, load_dataset
from .experiment import (
    ExperimentConfig,
    cross_validate,
    metrics,
    run_experiment,
    save_report,
)

# Scaled-down defaults keep a full scenario within desktop-CPU budgets;
# 'paper' restores the published experiment sizes.
SCALES = {
    "desk": {"n_train": 100, "n_val": 50, "n_test": 50, "epochs": 50, "multiplier": 10},
    "paper": {"n_train": 200, "n_val": 100, "n_test": 100, "epochs": 200, "multiplier": 20},
}


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scale", choices=sorted(SCALES), default="desk")
    p.add_argument("--devices", type=int, default=19)
    p.add_argument("--train-packets", type=int, help="per device (overrides scale)")
    p.add_argument("--val-packets", type=int, help="per device (overrides scale)")
    p.add_argument("--test-packets", type=int, help="per device (overrides scale)")
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="master seed")


def _manifest_from_args(args) -> DatasetManifest:
    scale = SCALES[args.scale]
    return DatasetManifest(
        n_devices=args.devices,
        n_train=args.train_packets if args.train_packets is not None else scale["n_train"],
        n_val=args.val_packets if args.val_packets is not None else scale["n_val"],
        n_test=args.test_packets if args.test_packets is not None else scale["n_test"],
        snr_db=args.snr_db,
        oversample_factor=args.oversample,
        master_seed=args.seed,
    )


def _add_policy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--augment", choices=("none", "cfo", "channel", "cfo+channel"), default="none")
    p.add_argument("--assignment", choices=("random", "orthogonal"), default="orthogonal")
    p.add_argument(
        "--cfo-assignment", choices=("random", "orthogonal"), default=None,
        help="override assignment for the CFO component only",
    )
    p.add_argument("--distribution", choices=("uniform", "bernoulli"), default="uniform")
    p.add_argument("--ppm-lo", type=float, default=-40.0)
    p.add_argument("--ppm-hi", type=float, default=40.0)
    p.add_argument("--multiplier", type=int, help="train copies per packet (overrides scale)")
    p.add_argument("--tta-reduce", choices=("softmax_mean", "logit_mean"), default="softmax_mean")


def _policy_from_args(args, n_tta: int = 0) -> AugmentationPolicy:
    scale = SCALES[args.scale]
    mult = args.multiplier if args.multiplier is not None else scale["multiplier"]
    return AugmentationPolicy(
        kind=args.augment,
        assignment=args.assignment,
        cfo_assignment=args.cfo_assignment,
        cfo_distribution=(args.distribution, args.ppm_lo, args.ppm_hi),
        multiplier=max(1, mult),
        n_tta=n_tta,
        tta_reduce=args.tta_reduce,
    )


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, help="overrides scale")
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--network", choices=("complex", "real"), default="complex")
    p.add_argument("--width", type=int, default=100, help="real-network width")


def _cmd_gen(args) -> int:
    manifest = _manifest_from_args(args)
    paths = generate_dataset(manifest, args.out)
    total = {s: manifest.packets_per_device(s) * manifest.n_devices for s in ("train", "val", "test")}
    print(f"wrote {paths['manifest']}")
    print(f"packets: {total['train']} train / {total['val']} val / {total['test']} test")
    return 0


def _cmd_train(args) -> int:
    manifest, data = load_dataset(args.data)
    x, y = data["train"]
    x_val, y_val = data["val"]
    cfg = ExperimentConfig(manifest=manifest, network=args.network, real_width=args.width)
    net = cfg.build_network()
    epochs = args.epochs if args.epochs is not None else SCALES[args.scale]["epochs"]
    tc = TrainConfig(
        epochs=epochs, batch_size=args.batch_size, learning_rate=args.lr,
        weight_decay=args.weight_decay, seed=args.seed, verbose=True,
    )
    params, history = train(
        net, normalize_power_array(x), y,
        tc, normalize_power_array(x_val), y_val,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, net, params, seed=args.seed, epoch=epochs)
    with open(out.with_suffix(".history.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(history[0].keys()))
        for row in history:
            writer.writerow(list(row.values()))
    print(f"saved {out}")
    return 0


def _cmd_eval(args) -> int:
    manifest, data = load_dataset(args.data)
    x, y = data[args.split]
    net, params, _ = load_checkpoint(args.checkpoint)
    policy = _policy_from_args(args, n_tta=args.n_tta)
    probs, preds = predict_tta_batch(
        net, params, x, policy, keyed_rng(args.seed, "tta", args.n_tta),
        manifest.sample_rate_hz, manifest.carrier_freq_hz,
    )
    acc, confusion = metrics(preds, y, n_classes=manifest.n_devices)
    print(f"accuracy: {acc:.4f}  (n_tta={args.n_tta}, split={args.split})")
    if args.confusion:
        np.savetxt(args.confusion, confusion, fmt="%d", delimiter=",")
        print(f"confusion matrix -> {args.confusion}")
    return 0


def _experiment_config(args) -> ExperimentConfig:
    scale = SCALES[args.scale]
    epochs = args.epochs if args.epochs is not None else scale["epochs"]
    return ExperimentConfig(
        manifest=_manifest_from_args(args),
        n_days_train=args.days,
        test_day=args.test_day,
        use_cfo=not args.no_cfo,
        use_channel=not args.no_channel,
        cfo_comp=args.cfo_comp,
        equalize=args.equalize,
        residual=args.residual,
        augment=_policy_from_args(args),
        tta_levels=tuple(args.tta),
        tta_reduce=args.tta_reduce,
        n_runs=args.runs,
        epochs=epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        network=args.network,
        real_width=args.width,
        master_seed=args.seed,
    )


def _cmd_exp(args) -> int:
    config = _experiment_config(args)
    report = run_experiment(config)
    paths = save_report(report, args.out)
    for level in sorted(report.mean, key=int):
        print(
            f"tta={level:>4}: accuracy {report.mean[level]:.4f} "
            f"+/- {report.std[level]:.4f} over {len(report.accuracies[level])} runs"
        )
    print(f"report -> {paths['report']}")
    return 0


def _cmd_xval(args) -> int:
    config = _experiment_config(args)
    result = cross_validate(config, k=args.k)
    accs = ", ".join(f"{a:.4f}" for a in result["fold_accuracies"])
    print(f"fold accuracies: {accs}")
    print(f"mean {result['mean']:.4f} +/- {result['std']:.4f}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(result, indent=1))
    print(f"result -> {args.out}")
    return 0


def _cmd_viz(args) -> int:
    net, params, _ = load_checkpoint(args.checkpoint)
    sig, history = visualize_filter(
        net, params, args.layer, args.filter,
        steps=args.steps, step_size=args.step_size, seed=args.seed,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({
        "layer": args.layer,
        "filter": args.filter,
        "objective_history": history,
        "samples_re": sig.samples.real.tolist(),
        "samples_im": sig.samples.imag.tolist(),
    }))
    print(f"objective {history[0]:.4g} -> {history[-1]:.4g} over {len(history)} steps")
    print(f"waveform -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rffp",
        description="RF fingerprinting testbed: preamble simulation, "
        "complex-valued CNNs, and day-robustness experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate and persist a dataset")
    _add_dataset_args(p)
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train on a stored dataset (no day emulation)")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--scale", choices=sorted(SCALES), default="desk")
    p.add_argument("--seed", type=int, default=0)
    _add_train_args(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a stored split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--n-tta", type=int, default=0)
    p.add_argument("--confusion", help="write the confusion matrix CSV here")
    p.add_argument("--scale", choices=sorted(SCALES), default="desk")
    p.add_argument("--seed", type=int, default=0)
    _add_policy_args(p)
    p.set_defaults(func=_cmd_eval)

    for name, help_text in (
        ("exp", "run a full day-based scenario (5 seeded runs by default)"),
        ("xval", "stratified k-fold cross validation of one scenario"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_dataset_args(p)
        _add_policy_args(p)
        _add_train_args(p)
        p.add_argument("--days", type=int, default=20, help="training days")
        p.add_argument("--test-day", choices=("same", "different"), default="different")
        p.add_argument("--no-cfo", action="store_true", help="disable the CFO confounder")
        p.add_argument("--no-channel", action="store_true", help="disable the channel confounder")
        p.add_argument("--cfo-comp", action="store_true", help="two-step CFO compensation")
        p.add_argument("--equalize", action="store_true", help="LTF channel equalization")
        p.add_argument("--residual", action="store_true", help="reconstruction-residual inputs")
        p.add_argument("--tta", type=int, nargs="+", default=[0, 100], help="TTA levels to score")
        p.add_argument("--runs", type=int, default=5)
        if name == "exp":
            p.add_argument("--out", required=True, help="report directory")
            p.set_defaults(func=_cmd_exp)
        else:
            p.add_argument("--k", type=int, default=5)
            p.add_argument("--out", required=True, help="result JSON path")
            p.set_defaults(func=_cmd_xval)

    p = sub.add_parser("viz", help="gradient-ascent visualization of one filter")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--filter", type=int, required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="waveform JSON path")
    p.set_defaults(func=_cmd_viz)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
