"""The seeded generator must be bit-portable: golden values are frozen."""

import numpy as np

from tilerank.rng import SplitMix64, bulk_floats, bulk_u64

# Widely published reference outputs of splitmix64 for seed 0.
SEED0_FIRST5 = [
    0xE220A8397B1DCDAF,
    0x6E789E6AA1B965F4,
    0x06C45D188009454F,
    0xF88BB8A8724C81EC,
    0x1B39896A51A8749B,
]


def test_reference_sequence_seed0():
    stream = SplitMix64(0)
    assert [stream.next_u64() for _ in range(5)] == SEED0_FIRST5


def test_bulk_matches_sequential():
    stream = SplitMix64(123456789)
    seq = [stream.next_u64() for _ in range(100)]
    assert bulk_u64(123456789, 0, 100).tolist() == seq
    assert bulk_u64(123456789, 40, 10).tolist() == seq[40:50]


def test_floats_match_and_are_in_range():
    stream = SplitMix64(7)
    f = stream.floats(1000)
    assert np.all(f >= 0.0) and np.all(f < 1.0)
    expected = [(u >> 11) * 2.0 ** -53 for u in bulk_u64(7, 0, 1000).tolist()]
    assert f.tolist() == expected


def test_stream_mixes_scalar_and_bulk():
    a = SplitMix64(9)
    a.next_u64()
    tail = a.floats(5)
    assert tail.tolist() == bulk_floats(9, 1, 5).tolist()


def test_shuffle_deterministic():
    items1 = list(range(20))
    items2 = list(range(20))
    SplitMix64(3).shuffle(items1)
    SplitMix64(3).shuffle(items2)
    assert items1 == items2
    assert sorted(items1) == list(range(20))
