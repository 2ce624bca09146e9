import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from pdlab.datagen import sample_linear_truth
from pdlab.rng import make_stream
from pdlab.stream import (
    ExampleSequence,
    StreamConfig,
    derive_pair_seeds,
    iter_windows,
    permutation_for_window,
    windowed_stream,
)

TRUTH = sample_linear_truth(make_stream(0))


def _rows(X, y):
    return np.concatenate([X, y[:, None].astype(np.uint8)], axis=1)


def _multiset(X, y):
    rows = _rows(X, y)
    return rows[np.lexsort(rows.T[::-1])]


@given(st.integers(1, 3000), st.integers(0, 6), st.sampled_from([1, 7, 32]))
def test_windows_are_permutations_of_the_shared_sequence(T, log2_z, s):
    cfg = StreamConfig(T, s, log2_z)
    seq = ExampleSequence(TRUTH, 11)
    for k, X, y in iter_windows(cfg, 11, 99, TRUTH):
        start = k * cfg.window_len
        Xs, ys = seq.take(start, min(T, start + cfg.window_len))
        assert np.array_equal(_multiset(X, y), _multiset(Xs, ys))


@given(st.integers(1, 5000), st.sampled_from([1, 32]), st.integers(0, 5))
def test_batch_count_and_sizes(T, s, log2_z):
    batches = list(windowed_stream(StreamConfig(T, s, log2_z), 3, 4, TRUTH))
    assert len(batches) == -(-T // s)
    assert sum(b[0].shape[0] for b in batches) == T
    assert all(b[0].shape[0] == s for b in batches[:-1])


def test_sequence_independent_of_block_and_window():
    a = ExampleSequence(TRUTH, 5).take(1000, 9000)
    b = ExampleSequence(TRUTH, 5)
    parts = [b.take(i, min(i + 777, 9000)) for i in range(1000, 9000, 777)]
    assert np.array_equal(a[0], np.concatenate([p[0] for p in parts]))
    assert np.array_equal(a[1], np.concatenate([p[1] for p in parts]))


def test_z_one_gives_identical_batches():
    seeds = derive_pair_seeds(0, 0, "identical")
    cfg = StreamConfig(2000, 32, 0)
    a = list(windowed_stream(cfg, seeds.data_seed, seeds.shuffle_seed_a, TRUTH))
    b = list(windowed_stream(cfg, seeds.data_seed, seeds.shuffle_seed_b, TRUTH))
    assert all(np.array_equal(xa, xb) and np.array_equal(ya, yb) for (xa, ya), (xb, yb) in zip(a, b))


def test_members_differ_when_shuffled():
    seeds = derive_pair_seeds(0, 0, "identical")
    cfg = StreamConfig(4096, 32, 4)
    a = np.concatenate([x for x, _ in windowed_stream(cfg, seeds.data_seed, seeds.shuffle_seed_a, TRUTH)])
    b = np.concatenate([x for x, _ in windowed_stream(cfg, seeds.data_seed, seeds.shuffle_seed_b, TRUTH)])
    assert not np.array_equal(a, b)


def test_pair_seeds():
    same = derive_pair_seeds(3, 2, "identical")
    diff = derive_pair_seeds(3, 2, "distinct")
    assert same.init_seed_a == same.init_seed_b
    assert diff.init_seed_a != diff.init_seed_b
    assert same.init_seed_a == diff.init_seed_a
    assert same.shuffle_seed_a != same.shuffle_seed_b
    assert same.data_seed == diff.data_seed
    assert derive_pair_seeds(3, 1, "identical").data_seed != same.data_seed
    with pytest.raises(ValueError):
        derive_pair_seeds(3, 0, "random")


def test_permutation_uniform_positions():
    # position of element 0 over many windows should be uniform
    n, trials = 8, 8000
    counts = np.bincount([int(np.argmax(permutation_for_window(1, k, n) == 0)) for k in range(trials)], minlength=n)
    assert chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("kwargs", [{"total_examples": 0}, {"batch_size": 0}, {"log2_z": -1}, {"master_seed": -1}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        StreamConfig(**kwargs)


def test_memory_is_bounded_by_window():
    seq = ExampleSequence(TRUTH, 1)
    seq.take(0, 20000)
    assert len(seq._cache) == 1
