from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gapaudit.learn.rng import Rng


@dataclass
class SplitSpec:
    """Fixed train/test partition of ``n`` rows."""

    train_fraction: float = 0.8
    seed: int = 42
    train_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    test_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def to_json(self) -> dict:
        return {
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "train_indices": self.train_indices.tolist(),
            "test_indices": self.test_indices.tolist(),
        }


def make_split(n: int, spec: SplitSpec | None = None) -> SplitSpec:
    """Shuffle ``0..n-1`` (xorshift64* Fisher-Yates) and cut at ``round(train_fraction * n)``."""
    spec = spec or SplitSpec()
    if n < 5:
        raise ValueError("need at least 5 rows to split")
    if not 0 < spec.train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    perm = Rng(spec.seed).permutation(n)
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    return SplitSpec(spec.train_fraction, spec.seed, perm[:n_train].copy(), perm[n_train:].copy())
