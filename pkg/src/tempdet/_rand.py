"""Deterministic RNG plumbing for sharded Monte Carlo runs.

Every shard owns a generator keyed by (seed, *shard key), so results are
bit-identical for a given seed no matter how many worker threads run the
shards. Shard boundaries depend only on the workload, never on the
thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

_T = TypeVar("_T")
_A = TypeVar("_A")


def norm_seed(seed: int) -> int:
    """Map an arbitrary int seed to the nonnegative domain of SeedSequence."""
    seed = int(seed)
    return seed if seed >= 0 else seed + 2**64


def spawn_rng(*key: int) -> np.random.Generator:
    """Generator keyed by a tuple of nonnegative ints."""
    return np.random.default_rng(list(key))


def shard_counts(total: int, per_shard: int) -> list[int]:
    full, rem = divmod(int(total), int(per_shard))
    sizes = [per_shard] * full
    if rem:
        sizes.append(rem)
    return sizes


def rows_per_shard(width: int, target_elements: int = 4_000_000,
                   lo: int = 256, hi: int = 65_536) -> int:
    """Shard row count bounded so a shard buffer stays near target_elements."""
    rows = target_elements // max(int(width), 1)
    return max(lo, min(hi, rows))


def run_sharded(fn: Callable[[_A], _T], args: Sequence[_A], threads: int) -> list[_T]:
    """Run fn over args, results in argument order regardless of threads."""
    if threads > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]
