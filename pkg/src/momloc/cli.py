"""Command line interface.

Subcommands: generate | baseline | train | eval | sweep.  Global flags
--config, --seed, --out apply to every subcommand; --seed overrides the
config's master seed and --out its output directory.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config, with_overrides
from .harness import SWEEP_AXES, cmd_baseline, cmd_eval, cmd_generate, cmd_sweep, cmd_train


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key=value config file (defaults apply if omitted)")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.no_figures:
        overrides["figures"] = False
    return with_overrides(config, **overrides) if overrides else config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momloc",
        description="Calibration-free human localization from mean pixel estimators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate the synthetic walking dataset")
    _common(p)
    p.add_argument("--write-observations", action="store_true",
                   help="also materialize sampled observation points")

    p = sub.add_parser("baseline", help="classical PnP + triangulation evaluation")
    _common(p)
    p.add_argument("--mode", choices=["known-P", "estimated-P"], default="known-P",
                   help="use true camera matrices or DLT estimates")
    p.add_argument("--frames", help="frames CSV (defaults to <out>/frames.csv)")

    p = sub.add_parser("train", help="train the localization network")
    _common(p)
    p.add_argument("--no-decoder", action="store_true", help="disable the reconstruction decoder")
    p.add_argument("--frames", help="frames CSV (defaults to <out>/frames.csv)")

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    _common(p)
    p.add_argument("--checkpoint", help="checkpoint file (defaults to <out>/checkpoint.txt)")
    p.add_argument("--frames", help="frames CSV (defaults to <out>/frames.csv)")

    p = sub.add_parser("sweep", help="robustness sweep: regenerate/retrain/evaluate per level")
    _common(p)
    p.add_argument("--axis", choices=list(SWEEP_AXES), required=True)
    p.add_argument("--levels", required=True,
                   help="comma-separated levels, e.g. 0,5,10,19")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _load(args)
    if args.command == "generate":
        cmd_generate(config, write_observations=args.write_observations)
    elif args.command == "baseline":
        cmd_baseline(config, mode=args.mode, frames_path=args.frames)
    elif args.command == "train":
        if args.no_decoder:
            config = with_overrides(config, decoder=False)
        cmd_train(config, frames_path=args.frames)
    elif args.command == "eval":
        cmd_eval(config, checkpoint_path=args.checkpoint, frames_path=args.frames)
    elif args.command == "sweep":
        levels = [float(t) for t in args.levels.split(",")]
        cmd_sweep(config, args.axis, levels)
    return 0


if __name__ == "__main__":
    sys.exit(main())
