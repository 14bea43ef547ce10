"""Repo-wide seeded generator.

xorshift64* (Vigna, 2016): a 64-bit xorshift register with a multiplicative
output scramble. Seeds are expanded with splitmix64 so that small or zero
seeds still give a well-mixed non-zero state. Streams are stable within this
package; cross-language users should compare statistics, not bit streams.
"""

from __future__ import annotations

from collections.abc import MutableSequence, Sequence
from typing import TypeVar

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
_INV_2_53 = 1.0 / (1 << 53)

T = TypeVar("T")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class ShiftRegister64:
    """xorshift64* generator with a small convenience surface."""

    __slots__ = ("_state",)

    def __init__(self, seed: int = 0):
        state = splitmix64(seed & _MASK)
        self._state = state or 0x9E3779B97F4A7C15

    @classmethod
    def substream(cls, seed: int, index: int) -> "ShiftRegister64":
        """Independent generator derived from ``(seed, index)``."""
        return cls(splitmix64((seed & _MASK) ^ splitmix64(index + 1)))

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased (rejection sampling)."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n > 1 << 64:
            raise ValueError("n must be at most 2**64")
        shift = 64 - (n - 1).bit_length()
        while True:
            r = self.next_u64() >> shift
            if r < n:
                return r

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise IndexError("choice from empty sequence")
        return seq[self.randbelow(len(seq))]

    def shuffle(self, seq: MutableSequence) -> None:
        """Fisher-Yates, in place."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randbelow(i + 1)
            seq[i], seq[j] = seq[j], seq[i]
