"""Deterministic fan-out of per-path work over worker processes.

Paths are identified by their index, and each index owns its own random
stream, so splitting ``[0, n)`` into chunks changes nothing but wall time.
Chunk results are concatenated in index order.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np


def resolve_workers(workers: int | None) -> int:
    if workers is None or workers <= 0:
        return os.cpu_count() or 1
    return int(workers)


def chunk_bounds(start: int, stop: int, n_chunks: int) -> list[tuple[int, int]]:
    n = stop - start
    n_chunks = max(1, min(n_chunks, n)) if n > 0 else 1
    edges = np.linspace(start, stop, n_chunks + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def run_indexed(
    func: Callable[..., dict[str, np.ndarray]],
    n: int,
    args: tuple = (),
    workers: int = 1,
    start: int = 0,
) -> dict[str, np.ndarray]:
    """Evaluate ``func(lo, hi, *args)`` over ``[start, start + n)``.

    ``func`` must be a module-level function returning a dict of equal-length
    arrays; results are concatenated field by field.
    """
    workers = resolve_workers(workers)
    if workers == 1 or n < 2 * workers:
        return func(start, start + n, *args)
    bounds = chunk_bounds(start, start + n, 4 * workers)
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(func, lo, hi, *args) for lo, hi in bounds]
        parts = [f.result() for f in futures]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
