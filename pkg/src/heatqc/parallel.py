"""Ordered map over independent work items, capped by ``HEATQC_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("HEATQC_THREADS")
    if not raw:
        return max(1, min(default, os.cpu_count() or 1))
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn, items, workers: int | None = None):
    """``[fn(x) for x in items]``, possibly on a thread pool; order is preserved."""
    items = list(items)
    workers = worker_count(len(items)) if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
