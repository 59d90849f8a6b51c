"""Keyed random streams.

Every stochastic routine takes an integer seed. Sub-streams are derived by
hashing ``(seed, *keys)`` through ``SeedSequence`` so that stream ``i`` is the
same whether it is drawn first, last, or on another worker.
"""

from __future__ import annotations

import os

import numpy as np

SEED_ENV = "CASCADEMIX_SEED"


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else fallback
