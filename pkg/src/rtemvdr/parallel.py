"""Seed derivation and order-preserving parallel map for Monte Carlo loops."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

# stream domains, so that e.g. RTE trial t and equivalent-model draw t never share randomness
DOMAIN_TRIALS = 0
DOMAIN_EQUIVALENT = 1
DOMAIN_CALIBRATION = 2


def derive_seed(seed: int, index: int, domain: int = DOMAIN_TRIALS) -> int:
    """64-bit seed of substream ``index`` within ``domain``; independent of scheduling."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(domain), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ordered_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(item) for item in items]``, optionally across processes.

    Results come back in input order, so any reduction over them is
    independent of the worker count.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def chunked(indices: Iterable[int], size: int) -> list[list[int]]:
    indices = list(indices)
    return [indices[i:i + size] for i in range(0, len(indices), size)]
