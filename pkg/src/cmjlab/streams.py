"""Reproducible random streams and order-independent replica fan-out.

Every replica owns a Philox key derived from ``(seed, replica)``.  Inside a
replica, individual ``i`` draws from the counter block ``(0, i, purpose, 0)``
of that key, so its randomness does not depend on the order in which the
simulation visits individuals.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

LIFE = 0
MARKS = 1
REPLICA = 2


def replica_key(seed: int, replica: int = 0) -> np.ndarray:
    """128-bit Philox key for one replica."""
    return np.random.SeedSequence([int(seed), int(replica)]).generate_state(2, np.uint64)


def stream(key: np.ndarray, index: int, purpose: int = LIFE) -> np.random.Generator:
    """Independent generator for individual ``index`` within a replica."""
    bitgen = np.random.Philox(key=key, counter=[0, int(index), int(purpose), 0])
    return np.random.Generator(bitgen)


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Replica-level generator (distinct from every individual stream)."""
    return stream(replica_key(seed, replica), 0, REPLICA)


def fan_out(fn: Callable[[int], T], replicas: Iterable[int], threads: int = 1) -> list[T]:
    """Apply ``fn`` to every replica index, results in replica order.

    Results are identical for any ``threads`` because each call derives its
    randomness from its own replica index.
    """
    items: Sequence[int] = list(replicas)
    if threads <= 1 or len(items) <= 1:
        return [fn(r) for r in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
