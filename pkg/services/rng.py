"""
Portable seeded random source.

The generator is xorshift64* (Marsaglia shift triple 12/25/27 with the
0x2545F4914F6CDD1D output multiplier), seeded through one round of
splitmix64. Everything is plain 64-bit integer arithmetic so the stream is
identical on every host and in any other language that implements the same
two functions.
"""

import math
from typing import List, MutableSequence, Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
_MULTIPLIER = 0x2545F4914F6CDD1D


def splitmix64(value: int) -> int:
    """One splitmix64 scramble of a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64:
    """xorshift64* generator with uniform, integer, Gaussian and shuffle draws."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        state = splitmix64(self.seed & MASK64)
        # the all-zero state is a fixed point of the shift register
        self._state = state or 0x9E3779B97F4A7C15
        self._spare = None

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * _MULTIPLIER) & MASK64

    def random(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * self.random()

    def randint(self, low: int, high: int) -> int:
        """Integer in [low, high], inclusive on both ends."""
        if high < low:
            raise ValueError(f"randint range is empty: [{low}, {high}]")
        return low + self.next_u64() % (high - low + 1)

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller normal draw; the second variate of each pair is cached."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return mu + sigma * z
        u1 = 1.0 - self.random()
        u2 = self.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        z0 = radius * math.cos(2.0 * math.pi * u2)
        self._spare = radius * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z0

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> List[int]:
        order = list(range(n))
        self.shuffle(order)
        return order

    def choice_weighted(self, items: Sequence[T], weights: Sequence[float]) -> T:
        total = float(sum(weights))
        if not items or total <= 0:
            raise ValueError("weighted choice needs at least one positive weight")
        mark = self.random() * total
        running = 0.0
        for item, weight in zip(items, weights):
            running += weight
            if mark < running:
                return item
        return items[-1]
