"""Counter-based RNG: reference vectors, stream independence, bulk parity."""

import numpy as np
import pytest

from renewbound.rng import (
    SeedableRngStream,
    bulk_uniforms,
    counter_u64,
    mix64,
    stream_key,
)

# First outputs of the classic splitmix64 generator started from state 0.
# Our counter scheme with key 0 walks the same state sequence, so these
# published values pin the mixing function exactly.
SPLITMIX64_FROM_ZERO = [
    0xE220A8397B1DCDAF,
    0x6E789E6AA1B965F4,
    0x06C45D188009454F,
    0xF88BB8A8724C81EC,
]


def test_counter_sequence_matches_published_splitmix64():
    got = [counter_u64(0, c) for c in range(1, 5)]
    assert got == SPLITMIX64_FROM_ZERO


def test_mix64_is_deterministic_and_distinct():
    vals = {mix64(z) for z in range(256)}
    assert len(vals) == 256
    assert mix64(12345) == mix64(12345)
    assert all(0 <= v < 2**64 for v in vals)


def test_stream_key_separates_seed_and_stream():
    keys = {stream_key(s, i) for s in range(8) for i in range(8)}
    assert len(keys) == 64


def test_uniform_never_hits_interval_endpoints():
    stream = SeedableRngStream(seed=7, stream_id=0)
    u = stream.uniforms(200_000)
    assert u.min() > 0.0
    assert u.max() < 1.0
    # mean of Uniform(0,1) with n=2e5: se ~ 0.00065
    assert abs(u.mean() - 0.5) < 0.004


def test_bulk_uniforms_matches_scalar_path():
    scalar = SeedableRngStream(seed=99, stream_id=3)
    singles = np.array([scalar.uniform() for _ in range(50)])
    bulk = bulk_uniforms(stream_key(99, 3), 0, 50)
    assert np.array_equal(singles, bulk)


def test_uniforms_advances_counter_consistently():
    a = SeedableRngStream(seed=5, stream_id=1)
    b = SeedableRngStream(seed=5, stream_id=1)
    first = a.uniforms(10)
    second = a.uniforms(10)
    both = b.uniforms(20)
    assert np.array_equal(np.concatenate([first, second]), both)


def test_same_seed_same_stream_replays():
    a = SeedableRngStream(seed=42, stream_id=17)
    b = SeedableRngStream(seed=42, stream_id=17)
    assert [a.next_u64() for _ in range(32)] == [b.next_u64() for _ in range(32)]


def test_distinct_streams_produce_distinct_output():
    a = SeedableRngStream(seed=42, stream_id=0)
    b = SeedableRngStream(seed=42, stream_id=1)
    assert [a.next_u64() for _ in range(8)] != [b.next_u64() for _ in range(8)]


def test_spawn_derives_named_substream():
    parent = SeedableRngStream(seed=3, stream_id=2)
    child = parent.spawn(9)
    fresh = SeedableRngStream(seed=3, stream_id=9)
    assert child.key == fresh.key
    assert child.uniform() == fresh.uniform()


def test_out_of_range_inputs_are_rejected():
    with pytest.raises(ValueError):
        SeedableRngStream(seed=-1, stream_id=0)
    with pytest.raises(ValueError):
        SeedableRngStream(seed=0, stream_id=2**64)
    with pytest.raises(ValueError):
        bulk_uniforms(stream_key(0, 0), -1, 4)
