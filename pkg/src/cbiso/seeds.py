"""Deterministic seed derivation: every random draw is keyed by (seed, path)."""
from __future__ import annotations

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys)))
