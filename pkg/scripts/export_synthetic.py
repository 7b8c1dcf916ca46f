#!/usr/bin/env python3

# Writes the synthetic train/test splits for the simulation deltas so the
# same samples can be fed to external tools or the csv task.
#
#   python3 -m scripts.export_synthetic --out data/synthetic --seeds 0 1 2 3 4

import argparse
import logging

from src.experiment import ExperimentConfig, export_splits

DELTAS = (0.0, 1.0, 5.0)

parser = argparse.ArgumentParser(description="export synthetic step-function splits as CSV")
parser.add_argument("--out", default="data/synthetic", help="output directory")
parser.add_argument("--deltas", type=float, nargs="+", default=list(DELTAS))
parser.add_argument("--seeds", type=int, nargs="+", default=[0])
parser.add_argument("--n-train", type=int, default=128)
parser.add_argument("--n-test", type=int, default=500)
parser.add_argument("--noise-family", default="gaussian", choices=["gaussian", "laplace"])
args = parser.parse_args()

logging.basicConfig(level="INFO", format="%(levelname)s %(message)s")

for delta in args.deltas:
    for seed in args.seeds:
        cfg = ExperimentConfig(delta=delta, seed=seed, n_train=args.n_train, n_test=args.n_test,
                               noise_family=args.noise_family, repeats=1)
        # one directory per delta, file names carry the seed
        for path in export_splits(cfg, f"{args.out}/delta_{delta:g}"):
            print(path)
