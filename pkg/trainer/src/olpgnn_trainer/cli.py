"""Command line: train on labeled datasets and export a weights artifact.

    olpgnn-train --datasets ds1/ ds2/ --out weights.bin --preset desk

The artifact is written in the toolkit's portable format and can be
validated end to end with `olpkit train-export-check`.
"""

from __future__ import annotations

import argparse
import sys

from .training import PRESETS, TrainConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="olpgnn-train", description=__doc__)
    parser.add_argument("--datasets", nargs="+", required=True, help="dataset directories")
    parser.add_argument("--out", required=True, help="weights artifact output path")
    parser.add_argument("--preset", choices=sorted(PRESETS), default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--lr", type=float, default=7e-4)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--val-fraction", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--loss-curve", default=None, help="CSV path for the loss curve")
    parser.add_argument("--log-every", type=int, default=10)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    epochs = args.epochs
    if epochs is None:
        epochs = PRESETS[args.preset]["epochs"] if args.preset else PRESETS["paper"]["epochs"]
    config = TrainConfig(
        datasets=tuple(args.datasets),
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=epochs,
        val_fraction=args.val_fraction,
        seed=args.seed,
        log_every=args.log_every,
    )
    result = train(config)
    result.save(args.out)
    if args.loss_curve:
        result.save_loss_curve(args.loss_curve)
    best = result.metadata["best_val_loss"]
    print(
        f"trained {result.metadata['num_train_samples']} samples for {epochs} epochs; "
        f"best val loss {best if best is not None else 'n/a'} "
        f"(epoch {result.metadata['best_epoch']}); wrote {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
