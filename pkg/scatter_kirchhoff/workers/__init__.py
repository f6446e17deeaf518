"""Worker pool helpers for kernel evaluation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """
    Map fn over items, preserving order

    Args:
        fn: Function applied to each item
        items: Work items
        threads: Worker threads; 1 runs inline

    Returns:
        Results in the order of items
    """
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    work = list(items)
    if threads == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    logger.debug("Dispatching %d chunks to %d threads", len(work), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, work))
