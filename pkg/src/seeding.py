#!/usr/bin/env python3

"""
Seeded random streams.

All randomness goes through ``make_rng``: a PCG64 generator seeded from a
``SeedSequence`` whose spawn key names the consumer, so the data, split,
init, shuffle and fold streams of one seed never share state.
"""

import numpy as np

SEED_MASK = (1 << 64) - 1

STREAM_DATA = 0
STREAM_SPLIT = 1
STREAM_INIT = 2
STREAM_SHUFFLE = 3
STREAM_FOLDS = 4
STREAM_FOLD_MODEL = 5


def make_rng(seed: int, stream: int, *keys: int) -> np.random.Generator:
    """
    :param seed: any 64-bit integer, negative values wrap modulo 2**64
    :param stream: one of the ``STREAM_*`` constants
    :param keys: extra non-negative integers that split the stream further (e.g. a fold id)
    :return: an independent PCG64 generator
    :rtype: numpy.random.Generator
    """
    sequence = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(stream, *keys))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, stream: int, *keys: int) -> int:
    """Deterministic 63-bit child seed, for handing a seed to a sub-run."""
    sequence = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(stream, *keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
