#!/usr/bin/env python3

from .dataset import Dataset, FeatureStats, split, split_counts
from .synthetic import SyntheticConfig, NOISE_FAMILIES, generate_synthetic, ideal_mean_error, signal, noise_sigma
from .tabular import load_csv, write_columns_csv, write_csv
