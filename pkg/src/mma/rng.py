"""Seeded, portable randomness.

Observation sequences, prediction items, menu shuffles and bot choices must
reproduce bit-identically across platforms and runs, so nothing in this
package touches ``random``.  All sampling draws from SplitMix64, and streams
for distinct purposes are derived from (seed XOR purpose-constant) so adding
a new consumer never perturbs existing sequences.
"""

from __future__ import annotations

from typing import List, Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Frozen stream tags. Arbitrary values; never renumber or reuse.
PURPOSE_OBSERVATIONS = 0x6F62736572766531
PURPOSE_PREDICTIONS = 0x7072656469637431
PURPOSE_MENU_SHUFFLE = 0x6D656E7573687566
PURPOSE_DISTRACTORS = 0x6469737472616374
PURPOSE_SESSION = 0x73657373696F6E31
PURPOSE_SIMULATION = 0x73696D756C617465
PURPOSE_BOT = 0x626F742D73747265


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit scramble."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def split_seed(seed: int, purpose: int, salt: int = 0) -> int:
    """Seed for an independent stream: the SplitMix64 output of seed^purpose.

    ``salt`` folds in a second differentiator (e.g. a per-session value) when
    one study seed must spawn a family of related but distinct streams.
    """
    s = mix64(((seed ^ purpose) + GOLDEN_GAMMA) & MASK64)
    if salt:
        s = mix64(((s ^ salt) + GOLDEN_GAMMA) & MASK64)
    return s


class SplitMix64:
    """The 64-bit SplitMix generator: state += golden gamma, then mix."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        return mix64(self._state)

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound), rejection-sampled (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < threshold:
                return x % bound

    def next_float(self) -> float:
        """Uniform float in [0, 1) built from 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: List[T]) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.next_below(len(seq))]


def stream(seed: int, purpose: int, salt: int = 0) -> SplitMix64:
    """Generator for one named sampling purpose under one seed."""
    return SplitMix64(split_seed(seed, purpose, salt))
