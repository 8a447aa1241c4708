"""Thread control.

Work is cut into chunks whose boundaries never depend on the worker count,
BLAS runs single-threaded inside each chunk, and partial results are
reduced in chunk order.  Outputs are therefore bit-identical for any value
of ``DBARLAB_THREADS``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from threadpoolctl import threadpool_limits


def n_threads() -> int:
    raw = os.environ.get("DBARLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@contextmanager
def deterministic_blas():
    with threadpool_limits(limits=1):
        yield


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` computed on a pool, returned in input order."""
    items = list(items)
    threads = n_threads() if threads is None else threads
    with deterministic_blas():
        if threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
