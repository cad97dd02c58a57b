"""Seedable pseudo-random generator used for init, dropout and shuffling."""

from __future__ import annotations

import numpy as np

_MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1
_DEFAULT_SEQ = 0xDA3E39CB94B95BDB


class Pcg32:
    """PCG-XSH-RR with 64-bit state and 32-bit output (O'Neill's pcg32).

    A training context owns exactly one instance; parameter init, dropout
    masks and epoch shuffles draw from it in a fixed order so that a seed
    pins down an entire run bit-for-bit, independent of numpy's RNG.
    """

    __slots__ = ("_state", "_inc")

    def __init__(self, seed: int, seq: int = _DEFAULT_SEQ):
        self._state = 0
        self._inc = ((seq << 1) | 1) & _MASK64
        self._next_u32()
        self._state = (self._state + (seed & _MASK64)) & _MASK64
        self._next_u32()

    def _next_u32(self) -> int:
        old = self._state
        self._state = (old * _MULT + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def random(self) -> float:
        """Float64 in [0, 1) built from 53 random bits."""
        hi = self._next_u32() >> 5  # 27 bits
        lo = self._next_u32() >> 6  # 26 bits
        return (hi * 67108864.0 + lo) / 9007199254740992.0

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def uniform_array(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        vals = [lo + (hi - lo) * self.random() for _ in range(n)]
        return np.array(vals, dtype=np.float64).reshape(shape)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError(f"randbelow needs n >= 1, got {n}")
        limit = (0x100000000 // n) * n
        while True:
            x = self._next_u32()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]
