"""Paired training streams with windowed shuffling.

A pair shares one example sequence (fixed by ``data_seed`` and the truth).
The sequence is cut into windows of ``z * s`` examples and each pair member
permutes every window with its own ``shuffle_seed``.  Examples are generated
lazily in fixed-size blocks, so memory stays O(z * s) and the sequence does
not depend on ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import rng as rngmod
from .datagen import Truth, sample_examples

BLOCK_SIZE = 4096
INIT_MODES = ("identical", "distinct")


@dataclass(frozen=True)
class StreamConfig:
    total_examples: int = 2**20
    batch_size: int = 32
    log2_z: int = 0
    master_seed: int = 0

    def __post_init__(self):
        if self.total_examples <= 0:
            raise ValueError(f"total_examples must be positive, got {self.total_examples}")
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.log2_z < 0:
            raise ValueError(f"log2_z must be nonnegative, got {self.log2_z}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @property
    def window_batches(self) -> int:
        return 1 << self.log2_z

    @property
    def window_len(self) -> int:
        return self.window_batches * self.batch_size

    @property
    def n_windows(self) -> int:
        return -(-self.total_examples // self.window_len)


@dataclass(frozen=True)
class PairSeeds:
    data_seed: int
    init_seed_a: int
    init_seed_b: int
    shuffle_seed_a: int
    shuffle_seed_b: int
    emul_seed_a: int
    emul_seed_b: int


def derive_pair_seeds(master_seed: int, pair_index: int, init_mode: str) -> PairSeeds:
    if init_mode not in INIT_MODES:
        raise ValueError(f"init_mode must be one of {INIT_MODES}, got {init_mode!r}")
    if pair_index < 0:
        raise ValueError("pair_index must be nonnegative")
    d = rngmod.derive_seed
    init_a = d(master_seed, rngmod.INIT, pair_index, 0)
    init_b = init_a if init_mode == "identical" else d(master_seed, rngmod.INIT, pair_index, 1)
    shuffle_a = d(master_seed, rngmod.SHUFFLE, pair_index, 0)
    shuffle_b = d(master_seed, rngmod.SHUFFLE, pair_index, 1)
    if shuffle_a == shuffle_b:  # pragma: no cover - 2**-64 event
        shuffle_b = d(master_seed, rngmod.SHUFFLE, pair_index, 2)
    return PairSeeds(
        data_seed=d(master_seed, rngmod.DATA, pair_index),
        init_seed_a=init_a,
        init_seed_b=init_b,
        shuffle_seed_a=shuffle_a,
        shuffle_seed_b=shuffle_b,
        emul_seed_a=d(master_seed, rngmod.EMULATION, pair_index, 0),
        emul_seed_b=d(master_seed, rngmod.EMULATION, pair_index, 1),
    )


class ExampleSequence:
    """Random-access view of the (conceptually infinite) example sequence for one seed."""

    def __init__(self, truth: Truth, data_seed: int, block_size: int = BLOCK_SIZE):
        self.truth = truth
        self.data_seed = data_seed
        self.block_size = block_size
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def block(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        hit = self._cache.get(index)
        if hit is None:
            stream = rngmod.make_stream(self.data_seed, rngmod.BLOCK, index)
            hit = sample_examples(self.truth, stream, self.block_size)
            # sequential access: only the most recent block is worth keeping
            self._cache = {index: hit}
        return hit

    def take(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        first, last = start // self.block_size, (stop - 1) // self.block_size
        if first == last:
            X, y = self.block(first)
            off = first * self.block_size
            return X[start - off : stop - off], y[start - off : stop - off]
        parts = []
        for b in range(first, last + 1):
            X, y = self.block(b)
            off = b * self.block_size
            lo, hi = max(start - off, 0), min(stop - off, self.block_size)
            parts.append((X[lo:hi], y[lo:hi]))
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def permutation_for_window(shuffle_seed: int, window_index: int, window_len: int) -> np.ndarray:
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    return rngmod.make_stream(shuffle_seed, rngmod.WINDOW, window_index).permutation(window_len)


def iter_windows(cfg: StreamConfig, data_seed: int, shuffle_seed: int, truth: Truth):
    """Yield ``(window_index, X, y)`` with each window already permuted.

    With ``z == 1`` a window is one mini-batch, whose membership is what matters
    for the mean gradient; it is delivered in sequence order so pair members
    see bit-identical batches.
    """
    seq = ExampleSequence(truth, data_seed)
    W = cfg.window_len
    for k in range(cfg.n_windows):
        start = k * W
        stop = min(cfg.total_examples, start + W)
        X, y = seq.take(start, stop)
        if cfg.window_batches > 1:
            perm = permutation_for_window(shuffle_seed, k, stop - start)
            X, y = X[perm], y[perm]
        yield k, X, y


def windowed_stream(
    cfg: StreamConfig, data_seed: int, shuffle_seed: int, truth: Truth
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Mini-batches ``(X uint8 (s, 32), y int8 (s,))`` in training order."""
    s = cfg.batch_size
    for _, X, y in iter_windows(cfg, data_seed, shuffle_seed, truth):
        for i in range(0, X.shape[0], s):
            yield X[i : i + s], y[i : i + s]
