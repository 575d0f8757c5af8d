"""Deterministic 64-bit generator used for splits, bootstraps and feature draws.

The state is seeded through SplitMix64 (Steele, Lea & Flood 2014; increment
0x9E3779B97F4A7C15) and advanced with xorshift64* (Vigna 2016; shifts
12/25/27, multiplier 0x2545F4914F6CDD1D). Doubles take the top 53 bits.
Bounded integers use rejection sampling so they are exactly uniform.

The kernels operate on a length-1 ``uint64`` array so the same code runs in
plain Python calls and inside numba-compiled tree builders.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1


def splitmix64(seed: int) -> int:
    z = (seed + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def new_state(seed: int) -> np.ndarray:
    s = splitmix64(int(seed) & MASK64)
    if s == 0:
        s = 0x9E3779B97F4A7C15
    return np.array([s], dtype=np.uint64)


@njit(cache=True)
def next_u64(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(0x2545F4914F6CDD1D)


@njit(cache=True)
def next_double(state):
    return (next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def next_below(state, n):
    """Uniform integer in [0, n)."""
    bound = np.uint64(n)
    limit = np.uint64(0xFFFFFFFFFFFFFFFF) - (np.uint64(0xFFFFFFFFFFFFFFFF) % bound)
    while True:
        r = next_u64(state)
        if r < limit:
            return np.int64(r % bound)


@njit(cache=True)
def shuffle_inplace(state, arr):
    """Fisher-Yates, walking from the last position down."""
    for i in range(arr.shape[0] - 1, 0, -1):
        j = next_below(state, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


@njit(cache=True)
def bootstrap_counts(state, n):
    counts = np.zeros(n, dtype=np.float64)
    for _ in range(n):
        counts[next_below(state, n)] += 1.0
    return counts


class Rng:
    """Thin object wrapper around the kernels above."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.state = new_state(seed)

    def u64(self) -> int:
        return int(next_u64(self.state))

    def random(self) -> float:
        return float(next_double(self.state))

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return int(next_below(self.state, n))

    def permutation(self, n: int) -> np.ndarray:
        arr = np.arange(n, dtype=np.int64)
        shuffle_inplace(self.state, arr)
        return arr

    def bootstrap(self, n: int) -> np.ndarray:
        return bootstrap_counts(self.state, n)


def derive_seed(seed: int, index: int) -> int:
    """Per-member seed: master seed XOR member index."""
    return (int(seed) ^ int(index)) & MASK64
