"""Deterministic random streams and chunked parallel Monte Carlo.

Reproducibility contract: every estimate is a deterministic function of
(seed, label, n) and nothing else.  Work is split into fixed-size chunks;
chunk i draws from an independent Philox stream keyed by
(seed, crc32(label) ^ i), so results are bit-identical regardless of the
worker count or scheduling order.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Sequence

import numpy as np

__all__ = ["CHUNK_SIZE", "stream_generator", "run_chunked"]

CHUNK_SIZE = 4096

_MASK64 = (1 << 64) - 1


def stream_generator(seed: int, label: str, chunk_index: int = 0) -> np.random.Generator:
    """Independent generator for one chunk of one named experiment."""
    tag = zlib.crc32(label.encode("utf-8")) ^ (chunk_index & _MASK64)
    key = [int(seed) & _MASK64, tag & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


_WORKER_CTX: Any = None


def _init_worker(builder, builder_args):
    global _WORKER_CTX
    _WORKER_CTX = builder(*builder_args)


def _run_worker_chunk(task, seed, label, index, count):
    rng = stream_generator(seed, label, index)
    return task(_WORKER_CTX, rng, count)


def run_chunked(
    task: Callable[[Any, np.random.Generator, int], Any],
    builder: Callable[..., Any],
    builder_args: Sequence[Any],
    n: int,
    seed: int,
    label: str,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list:
    """Run ``task(ctx, rng, count)`` over ``n`` samples in chunks.

    Returns the per-chunk results in chunk order.  ``builder(*builder_args)``
    constructs the shared read-only context once per process, so it must be
    picklable when ``workers > 1``.
    """
    if n <= 0:
        return []
    chunks = []
    start = 0
    index = 0
    while start < n:
        count = min(chunk_size, n - start)
        chunks.append((index, count))
        start += count
        index += 1

    if workers <= 1 or len(chunks) == 1:
        ctx = builder(*builder_args)
        return [task(ctx, stream_generator(seed, label, i), c) for i, c in chunks]

    results: list = [None] * len(chunks)
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(builder, tuple(builder_args))
    ) as pool:
        futures = {
            pool.submit(_run_worker_chunk, task, seed, label, i, c): pos
            for pos, (i, c) in enumerate(chunks)
        }
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()
    return results
