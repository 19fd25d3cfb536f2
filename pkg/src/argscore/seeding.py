"""Named RNG streams derived from one root seed.

Each consumer (shuffling, masking, dropout, mock generation, corpus
synthesis) gets its own stream so toggling one cannot shift the draws of
another."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 63) - 1

STREAM_IDS = {
    "init": 0,
    "shuffle": 1,
    "masking": 2,
    "dropout": 3,
    "mock": 4,
    "synth": 5,
    "split": 6,
}


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed & _MASK, STREAM_IDS[name]])


def derive_seed(seed: int, *keys: int) -> int:
    """Stable scalar seed from a root seed plus integer context keys."""
    entropy = [seed & _MASK] + [int(k) & _MASK for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
