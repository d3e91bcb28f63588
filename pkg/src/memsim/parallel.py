"""Worker-thread helper honoring the MEM_THREADS cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def max_workers() -> int:
    raw = os.environ.get("MEM_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValueError(f"MEM_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValueError(f"MEM_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map with results in input order; items must be independent."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
