"""Deterministic fan-out over work items with per-item random streams."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np


def item_rng(seed, index):
    """Generator for item ``index``; depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _call(task):
    fn, item, seed, index = task
    return fn(item, item_rng(seed, index))


def run_parallel(items, worker_fn, seed, workers=1):
    """Apply ``worker_fn(item, rng)`` to every item; results come back in item order.

    Each item owns a random stream derived from (seed, item index), so results do
    not depend on the number of workers or on completion order.  With
    ``workers > 1`` the function and items must be picklable.
    """
    tasks = [(worker_fn, item, seed, i) for i, item in enumerate(items)]
    if workers <= 1 or len(tasks) <= 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, tasks))
