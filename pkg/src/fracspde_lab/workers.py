"""Ordered thread-pool mapping for sweeps and Monte Carlo replicas."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_threads = 1


def set_default_threads(threads: int) -> None:
    """Set the worker cap used when callers do not pass ``threads``."""
    global _threads
    if threads < 1:
        raise ValueError("threads must be >= 1")
    _threads = threads


def default_threads() -> int:
    return _threads


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply ``fn`` to every item, results in input order.

    Input order is kept regardless of the worker count, so reductions over the
    result are identical for any ``threads``.
    """
    workers = _threads if threads is None else threads
    if workers < 1:
        raise ValueError("threads must be >= 1")
    work = list(items)
    if workers == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=min(workers, len(work))) as pool:
        return list(pool.map(fn, work))
