"""Splittable 64-bit PRNG (SplitMix64).

Every stimulus in the verify path is drawn from one of these, seeded
explicitly, so any verdict can be replayed bit-for-bit on any platform.
Streams are prefix-stable: the first n draws are the same regardless of how
many more are taken afterwards.  ``split`` derives an independent child
stream, used to give each fuzzing run its own generator without coupling
their sequences.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def next_bits(self, nbits: int) -> int:
        """Uniform integer in [0, 2**nbits)."""
        if nbits <= 0:
            return 0
        value = 0
        got = 0
        while got < nbits:
            value = (value << 64) | self.next_u64()
            got += 64
        return value >> (got - nbits)

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        nbits = (bound - 1).bit_length()
        while True:
            v = self.next_bits(nbits) if nbits else 0
            if v < bound:
                return v

    def split(self) -> "SplitMix64":
        """Derive an independent child generator."""
        return SplitMix64(self.next_u64() ^ 0x5851F42D4C957F2D)
