"""Ordered thread-pool map for independent grid cells.

LAPACK releases the GIL, so threads give real overlap for eigensolver
sweeps. Results always come back in input order.
"""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "TRANSMON_HARPER_THREADS"


def resolve_threads(hint=None):
    """Thread count: the environment variable wins, then the hint, then 1."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    if hint:
        return max(1, int(hint))
    return 1


def grid_map(fn, items, threads=None):
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
