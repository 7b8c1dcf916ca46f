#!/usr/bin/env python3

from .fold_plan import FoldPlan, make_fold_plan
from .residual_cache import ResidualCache, config_fingerprint, save_cache, load_cache
from .virtual_residuals import compute_virtual_residuals, in_sample_residuals, signal_layer_sizes
