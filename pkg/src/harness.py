#!/usr/bin/env python3

import argparse
import json
import logging
import sys

from .config import OUTPUT_ROOT_ENV, read_config_file
from .errors import CheckFailedError, VirevalError
from .experiment import (CONFIG_KINDS, ExperimentConfig, ablation_no_vr, build_folds,
                         evaluate_checkpoint, export_splits, load_report, run_experiment,
                         summary_table, train_checkpoint)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

COMMANDS = ("simulate", "folds", "train", "eval", "ablate", "report", "run")

EXAMPLES = (
    "Examples:\n"
    "  python3 -m src.harness run --delta 5 --methods joint_laplace,separate_laplace --repeats 5\n"
    "  python3 -m src.harness ablate --delta 1 --lam 0.02 --output-dir runs/ablation\n"
    "  python3 -m src.harness run --config experiment.cfg --epochs 200\n"
    "  python3 -m src.harness train --method separate_laplace --seed 3\n"
    "  python3 -m src.harness eval runs/train/separate_laplace_seed3.json\n"
    "  python3 -m src.harness report runs/experiment runs/ablation\n"
)


def _add_config_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("experiment settings", "override the config file; numeric values may be expressions")
    group.add_argument("--config", help="flat 'key = value' config file")
    for key, kind in CONFIG_KINDS.items():
        flag = "--" + key.replace("_", "-")
        if kind == "bool":
            group.add_argument(flag, dest=key, nargs="?", const="true", metavar="BOOL")
        else:
            group.add_argument(flag, dest=key, metavar=kind.rstrip("?").upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python3 -m src.harness",
        description=(
            "Train and compare heteroscedastic error estimators on synthetic or tabular regression data.\n"
            f"Default output root comes from ${OUTPUT_ROOT_ENV} (falls back to ./runs).\n\n" + EXAMPLES
        ),
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("-v", "--verbose", action="store_true", help="shortcut for --log-level DEBUG")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="write the data splits of one seed as CSV")
    folds = commands.add_parser("folds", help="compute and save the virtual-residual cache of one seed")
    train = commands.add_parser("train", help="train one method on one seed and save a checkpoint")
    train.add_argument("--method", required=True, help="loss variant to train")
    evaluate = commands.add_parser("eval", help="evaluate a checkpoint on its test split")
    evaluate.add_argument("checkpoint", help="checkpoint written by 'train'")
    evaluate.add_argument("--pairs", help="also write the (r, e_hat) pairs to this CSV")
    ablate = commands.add_parser("ablate", help="separate formulation with and without virtual residuals")
    run = commands.add_parser("run", help="train and evaluate every method on every seed")
    report = commands.add_parser("report", help="summary table of emitted reports")
    report.add_argument("reports", nargs="+", help="report.json files or run directories")
    report.add_argument("--eta", type=float, default=0.5, help="PiR column of the table")

    for sub in (simulate, folds, train, evaluate, ablate, run):
        _add_config_flags(sub)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_mapping(read_config_file(args.config), base=cfg)
    flags = {key: getattr(args, key) for key in CONFIG_KINDS if getattr(args, key, None) is not None}
    if flags:
        cfg = ExperimentConfig.from_mapping(flags, base=cfg)
    return cfg


def dispatch(args: argparse.Namespace):
    if args.command == "report":
        print(summary_table([load_report(path) for path in args.reports], eta=args.eta), end="")
        return
    if args.command == "eval":
        metrics = evaluate_checkpoint(args.checkpoint, pairs_path=args.pairs)
        print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
        return

    cfg = config_from_args(args)
    if args.command == "simulate":
        for path in export_splits(cfg):
            print(path)
    elif args.command == "folds":
        print(build_folds(cfg))
    elif args.command == "train":
        print(train_checkpoint(cfg, args.method))
    elif args.command in ("run", "ablate"):
        runner = run_experiment if args.command == "run" else ablation_no_vr
        try:
            report = runner(cfg)
        except CheckFailedError as err:
            # the table shows which rows failed
            print(summary_table([err.report]), end="")
            raise
        print(summary_table([report]), end="")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level="DEBUG" if args.verbose else args.log_level, format=LOG_FORMAT)
    try:
        dispatch(args)
    except VirevalError as err:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
