"""Deterministic replicate fan-out.

Each task carries its own key, so results do not depend on scheduling;
they are always returned in task order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence


def map_ordered(fn: Callable, tasks: Sequence, workers: int = 1, chunksize: int | None = None) -> list:
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    if chunksize is None:
        chunksize = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunksize))


def iter_ordered(fn: Callable, tasks: Iterable, workers: int = 1):
    """Like :func:`map_ordered` but yields results as the ordered prefix completes."""
    tasks = list(tasks)
    if workers is None or workers <= 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, tasks)
