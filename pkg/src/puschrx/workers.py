"""Chunked worker-pool helper with a bit-reproducibility contract.

Work is split along one index axis into contiguous chunks; each chunk is
computed by the same per-item code, and chunks are reassembled in index
order. Because no kernel's per-item result depends on how the batch is
sliced, output is bit-identical for every worker count.

PUSCHRX_WORKERS overrides the pool size (default: number of logical
processors).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

WORKERS_ENV = "PUSCHRX_WORKERS"


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None:
        if explicit < 1:
            raise ValueError(f"worker count must be >= 1, got {explicit}")
        return explicit
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunk_ranges(n_items: int, workers: int) -> list[tuple[int, int]]:
    """Split [0, n_items) into at most `workers` contiguous ranges."""
    if n_items <= 0:
        return []
    workers = min(workers, n_items)
    base, extra = divmod(n_items, workers)
    ranges = []
    start = 0
    for w in range(workers):
        stop = start + base + (1 if w < extra else 0)
        ranges.append((start, stop))
        start = stop
    return ranges


def run_chunked(fn, n_items: int, workers: int | None = None) -> list:
    """Apply fn(start, stop) per chunk, returning results in index order."""
    w = worker_count(workers)
    ranges = chunk_ranges(n_items, w)
    if len(ranges) <= 1:
        return [fn(start, stop) for start, stop in ranges]
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        futs = [pool.submit(fn, start, stop) for start, stop in ranges]
        return [f.result() for f in futs]
