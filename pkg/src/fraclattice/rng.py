"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, substream)`` and started
at a counter whose high words hold the stream coordinates. Streams with
different coordinates never overlap, so draws do not depend on the order in
which levels or samples are visited.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# substream ids
NOISE = 0
MULTIPLIER = 1
MULTIPLIER_REF = 2
TREE = 3
BASELINE = 4


def stream(seed: int, substream: int, *coords: int) -> np.random.Generator:
    """Generator for the cell ``coords`` (at most two ints) of a substream."""
    if len(coords) > 2:
        raise ValueError("at most two stream coordinates are supported")
    counter = [0, 0, 0, 0]
    for i, c in enumerate(coords):
        counter[2 + i] = int(c) & MASK64
    bg = np.random.Philox(key=[int(seed) & MASK64, int(substream) & MASK64], counter=counter)
    return np.random.Generator(bg)


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for the ``index``-th sample of a run."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
