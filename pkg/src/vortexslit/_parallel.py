from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

# Work is always split into the same fixed-size chunks, whatever the thread
# count, so every element sees identical vectorised code paths.
CHUNK = 8192


def chunk_slices(n, size=CHUNK):
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def ordered_map(fn, items, threads=1):
    """map() that may run on threads but always returns results in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
