"""Process-pool helper for independent seeded trials.

Each trial owns its PRNG substream, so results are identical whatever the
worker count or scheduling; ``workers=1`` (or 0/None) degrades to a plain
loop, which is also the fallback when a pool cannot be spawned.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    env = os.environ.get("KMSW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def run_trials(fn, args_list, workers: int | None = None) -> list:
    """Map ``fn`` over argument tuples, preserving input order."""
    if workers is None:
        workers = default_workers()
    args_list = list(args_list)
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *args) for args in args_list]
            return [f.result() for f in futures]
    except (OSError, RuntimeError):
        return [fn(*args) for args in args_list]
