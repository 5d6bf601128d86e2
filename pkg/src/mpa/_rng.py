"""Counter-based random streams and blocked Monte Carlo.

Every draw comes from a Philox generator keyed by ``(seed, stream, block)``.
Work is cut into fixed-size blocks, so the numbers each block sees do not
depend on how many workers run them, and partial results are reduced in
block order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._accel import max_workers

BLOCK = 1 << 16


def generator(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(count: int, block: int = BLOCK):
    full, rest = divmod(int(count), block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn, count: int, seed: int, stream: int, block: int = BLOCK):
    """Run ``fn(rng, size)`` over the blocks of ``count`` draws; results in block order."""
    sizes = block_sizes(count, block)
    jobs = [(generator(seed, stream, i), n) for i, n in enumerate(sizes)]
    workers = min(max_workers(), len(jobs))
    if workers <= 1:
        return [fn(rng, n) for rng, n in jobs]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def complex_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) draws."""
    z = rng.standard_normal((size, 2))
    return (z[:, 0] + 1j * z[:, 1]) * np.sqrt(0.5)
