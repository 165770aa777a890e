from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..errors import ConfigError


@dataclass
class SplitPlan:
    """Repeated random train/test partitions; split ``k`` uses seed ``seed + k``."""

    seed: int
    num_repeats: int = 10
    train_fraction: float = 0.8
    splits: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __getitem__(self, k):
        return self.splits[k]

    def __len__(self):
        return len(self.splits)

    def digest(self, k: int) -> str:
        train, test = self.splits[k]
        h = hashlib.sha256()
        h.update(np.asarray(train, dtype=np.int64).tobytes())
        h.update(b"|")
        h.update(np.asarray(test, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


def train_size(n: int, train_fraction: float) -> int:
    # half-up rounding, independent of Python's banker's rounding
    return int(math.floor(train_fraction * n + 0.5))


def make_splits(n: int, seed: int, num_repeats: int = 10, train_fraction: float = 0.8) -> SplitPlan:
    if n < 5:
        raise ConfigError(f"need at least 5 samples to split, got {n}")
    if not 0 < train_fraction < 1:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    if num_repeats < 1:
        raise ConfigError("num_repeats must be positive")
    n_train = train_size(n, train_fraction)
    splits = []
    for k in range(num_repeats):
        perm = np.random.default_rng(seed + k).permutation(n)
        splits.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return SplitPlan(seed, num_repeats, train_fraction, splits)
