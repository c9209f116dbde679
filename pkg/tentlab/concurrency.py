"""Order-preserving parallel maps capped by ``TENTLAB_THREADS``."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Mapping, Optional, TypeVar

from tentlab.errors import InputError

logger = logging.getLogger(__name__)

THREADS_ENV = "TENTLAB_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(env: Optional[Mapping[str, str]] = None) -> int:
    """
    Resolve the worker count from the environment.

    Args:
        env: Environment mapping (defaults to ``os.environ``)

    Returns:
        int: Number of worker threads, at least 1

    Raises:
        InputError: If the variable is set to something other than a positive integer
    """
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return max(1, min(8, os.cpu_count() or 1))
    try:
        threads = int(raw)
    except ValueError as e:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from e
    if threads < 1:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return threads


def parallel_map(
    fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None
) -> List[R]:
    """
    Apply ``fn`` to every item, returning results in input order.

    Args:
        fn: Pure function to apply
        items: Inputs
        threads: Worker cap; ``None`` resolves from the environment

    Returns:
        list: ``[fn(item) for item in items]``
    """
    items = list(items)
    threads = resolve_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("Mapping %d items over %d threads.", len(items), threads)
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
