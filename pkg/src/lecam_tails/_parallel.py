"""Order-preserving thread fan-out capped by ``LECAM_TAILS_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidParameterError

ENV_THREADS = "LECAM_TAILS_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_THREADS, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise InvalidParameterError(f"{ENV_THREADS} must be a positive integer, got {raw!r}") from None
        if value < 1:
            raise InvalidParameterError(f"{ENV_THREADS} must be a positive integer, got {raw!r}")
        return value
    return os.cpu_count() or 1


def parallel_map(fn, items):
    """``[fn(x) for x in items]``, evaluated on up to ``worker_count()`` threads."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
