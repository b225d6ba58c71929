"""Reproducible, independent random streams keyed by (seed, path)."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by seed and an integer path."""
    keys = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) & 0xFFFFFFFFFFFFFFFF for k in path)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(keys)))


def derive_seed(seed: int, *path: int) -> int:
    keys = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) & 0xFFFFFFFFFFFFFFFF for k in path)]
    return int(np.random.SeedSequence(keys).generate_state(1, dtype=np.uint64)[0])
