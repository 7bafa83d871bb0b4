"""Seeded counter-based random generators.

Same (seed, stream) always yields the bit-identical draw sequence on a
given platform, and distinct streams are independent, so Monte-Carlo work
can be sharded without the result depending on the shard count.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic substream ``stream`` of the generator keyed by ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))
