from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """Worker cap taken from ``FRACSRC_THREADS`` (default 1)."""
    raw = os.environ.get("FRACSRC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(func: Callable[[T], R], items: Sequence[T]) -> list[R]:
    # results come back in input order, so reductions over them stay bit-reproducible
    n = thread_count()
    if n == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
