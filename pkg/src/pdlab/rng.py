"""Seed derivation for independent, reproducible random streams.

Every random draw in the laboratory comes from a Philox (counter-based)
generator keyed by ``(root_seed, purpose, *indices)``.  Two streams with
different keys are statistically independent; the same key always yields
the same stream, no matter which process or in what order it is created.
"""

from __future__ import annotations

import numpy as np

# purpose codes; never renumber, stored seeds depend on them
TRUTH = 1
DATA = 2
INIT = 3
SHUFFLE = 4
EMULATION = 5
EVAL = 6
TEACHER = 7
WINDOW = 8
BLOCK = 9

_MASK64 = (1 << 64) - 1


def _seed_sequence(root: int, keys: tuple[int, ...]) -> np.random.SeedSequence:
    if root < 0:
        raise ValueError(f"seed must be nonnegative, got {root}")
    return np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in keys))


def derive_seed(root: int, *keys: int) -> int:
    """Return a 64-bit integer seed derived from ``root`` and ``keys``."""
    state = _seed_sequence(root, keys).generate_state(2, np.uint64)
    return int(state[0]) & _MASK64


def make_stream(root: int, *keys: int) -> np.random.Generator:
    """Return a Philox generator for the stream identified by ``(root, *keys)``."""
    return np.random.Generator(np.random.Philox(_seed_sequence(root, keys)))
