"""Seed-stream helpers. Every random draw in the toolkit flows through here.

Streams are PCG64 generators keyed by a tuple of integers, so any component
(a mining pair, a training step, an evaluation episode) can own an
independent stream and parallel execution cannot reorder draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def seed_words(*parts: int) -> list[int]:
    """Map arbitrary Python ints onto the unsigned words SeedSequence accepts."""
    return [int(p) & _MASK64 for p in parts]


def spawn_rng(*parts: int) -> np.random.Generator:
    """PCG64 generator keyed by (part0, part1, ...). Stable across platforms."""
    return np.random.default_rng(seed_words(*parts))


def derive_seed(*parts: int) -> int:
    """Collapse a key tuple into a single reproducible 64-bit seed."""
    return int(np.random.SeedSequence(seed_words(*parts)).generate_state(1, np.uint64)[0])
