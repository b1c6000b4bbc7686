"""Deterministic pseudo-random numbers shared by clustering and fixtures.

The generator is SplitMix64: a 64-bit linear state (state advances by the
odd constant 0x9E3779B97F4A7C15 each draw) followed by a fixed bit-mixing
finalizer.  It is trivially portable, so two independent implementations
seeded identically produce identical streams:

    state    <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z        <- state
    z        <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z        <- (z XOR (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    output   <- z XOR (z >> 31)

Derived draws are defined exactly in terms of `next_u64`:

* `next_double`: take the top 53 bits, scale by 2^-53 -> [0, 1).
* `next_below(n)`: floor(next_double() * n), clamped to n - 1.
* `next_gaussian`: Box-Muller on two `next_double` draws, one value
  per call (no caching of the second value), evaluated with numpy's
  float64 kernels so scalar and batch draws agree bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Seeded 64-bit linear-state generator."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def next_below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.next_double() * n), n - 1)

    def next_gaussian(self) -> float:
        # Box-Muller through the batch kernel: libm and numpy disagree
        # by 1 ulp on log for some inputs, and draws must be identical
        # whether taken one at a time or as an array.
        return float(self.gaussian_array(1)[0])

    def next_uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_double()

    def gaussian_array(self, n: int) -> np.ndarray:
        """n gaussian draws, identical to n next_gaussian() calls.

        The state advance is linear, so draw k ahead of the current
        state is mix(state + k * gamma); that makes the whole batch a
        vector computation while consuming exactly 2n draws.
        """
        if n == 0:
            return np.zeros(0, dtype=np.float64)
        k = np.arange(1, 2 * n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + k * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        d = (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        self._state = (self._state + 2 * n * _GAMMA) & _MASK64
        u1 = np.maximum(d[0::2], 2.0 ** -53)
        u2 = d[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def spawn(self, stream: int) -> "SplitMix64":
        """Independent generator for a named substream."""
        child = SplitMix64(self._state ^ ((stream * _GAMMA) & _MASK64))
        child.next_u64()
        return child
