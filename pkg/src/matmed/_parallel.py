"""Process-pool map with the worker cap taken from MATMED_THREADS."""

import os
from concurrent.futures import ProcessPoolExecutor


def thread_cap(default: int | None = None) -> int:
    env = os.environ.get("MATMED_THREADS", "").strip()
    if env:
        return max(1, int(env))
    if default is not None:
        return max(1, default)
    return max(1, os.cpu_count() or 1)


def parallel_map(fn, items, workers: int | None = None):
    """Ordered map over items; sequential when one worker.

    ``fn`` and every item must be picklable (module-level function, plain
    data arguments).
    """
    items = list(items)
    workers = thread_cap() if workers is None else max(1, workers)
    workers = min(workers, len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
