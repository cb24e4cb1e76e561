"""Counter-based splittable random streams.

Every stream is identified by a (seed, stream_id) pair.  The n-th variate of a
stream is a pure function of (seed, stream_id, n), so replicas can be assigned
one stream each and simulated in any order, on any number of threads, with
byte-identical results.  The generator is the splitmix64 finalizer applied to
an additive counter sequence; the same arithmetic is implemented in the
compiled kernels, and both sides must produce identical bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer; bijective on 64-bit integers."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id: int) -> int:
    """Collapse (seed, stream_id) into the 64-bit key of a stream.

    The map is injective in stream_id for a fixed seed (the combining
    multipliers are odd), so distinct streams of one run never collide.
    """
    z = (seed * _MUL1 + stream_id * _MUL2 + _GOLDEN) & _MASK
    return mix64(z)


def counter_u64(key: int, counter: int) -> int:
    """The counter-th raw 64-bit word of the stream (counters start at 1)."""
    return mix64((key + counter * _GOLDEN) & _MASK)


@dataclass
class SeedableRngStream:
    """One independent uniform stream.

    >>> s = SeedableRngStream(seed=1, stream_id=0)
    >>> u = s.uniform()          # deterministic function of (1, 0, 1)
    >>> 0.0 < u < 1.0
    True

    ``uniform`` never returns an endpoint: the top 53 bits are centered in the
    unit interval, so log(u) and log1p(-u) are always finite.
    """

    seed: int
    stream_id: int
    counter: int = 0
    key: int = field(init=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if not 0 <= self.stream_id < 2**64:
            raise ValueError("stream_id must fit in 64 bits")
        self.key = stream_key(self.seed, self.stream_id)

    def next_u64(self) -> int:
        self.counter += 1
        return counter_u64(self.key, self.counter)

    def uniform(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) * _INV53

    def uniforms(self, n: int) -> np.ndarray:
        """Vectorized batch of the next n uniforms (advances the counter)."""
        out = bulk_uniforms(self.key, self.counter, n)
        self.counter += n
        return out

    def spawn(self, stream_id: int) -> "SeedableRngStream":
        """Fresh stream under the same seed."""
        return SeedableRngStream(self.seed, stream_id)


def bulk_uniforms(key: int, counter: int, n: int) -> np.ndarray:
    """Uniforms counter+1 .. counter+n of a stream, as a float64 array.

    numpy uint64 arithmetic wraps modulo 2**64, matching the scalar path.
    """
    if counter < 0 or n < 0:
        raise ValueError("counter and n must be nonnegative")
    idx = np.arange(counter + 1, counter + n + 1, dtype=np.uint64)
    z = np.uint64(key) + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
