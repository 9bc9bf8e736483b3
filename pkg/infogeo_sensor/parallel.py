"""Ordered worker pool capped by the ``INFOGEO_THREADS`` environment variable.

Results always come back in input order and are reduced by the caller in a
fixed order, so outputs do not depend on the worker count.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

log = logging.getLogger(__name__)

THREADS_ENV = "INFOGEO_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        count = int(raw)
    except ValueError:
        log.warning("Ignoring %s=%r (not an integer)", THREADS_ENV, raw)
        return 1
    if count < 1:
        log.warning("Ignoring %s=%d (must be >= 1)", THREADS_ENV, count)
        return 1
    return count


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``[fn(x) for x in items]``, possibly evaluated on a thread pool."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
