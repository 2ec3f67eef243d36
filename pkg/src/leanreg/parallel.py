"""Ordered parallel map over independent replications."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | str | None) -> int:
    if threads in (None, "auto"):
        return os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1 or 'auto', got {threads}")
    return threads


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | str | None = 1) -> list[R]:
    """``[fn(x) for x in items]``, possibly on a thread pool; output order is input order.

    Callers must make ``fn`` depend only on its argument (per-item random
    streams), so results do not depend on the thread count.
    """
    items = list(items)
    k = resolve_threads(threads)
    if k == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))
