"""Thread-count handling; results never depend on the number of workers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "OLIGOFRAG_THREADS"


def default_threads():
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def parallel_map(fn, items, threads=1):
    """Ordered map over ``items`` using up to ``threads`` worker threads."""
    items = list(items)
    threads = max(int(threads or 1), 1)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
