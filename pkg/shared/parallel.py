import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .constants import THREADS_ENV_VAR
from .errors import ConfigError

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

_threads = 1


def resolve_threads(cli_value: Optional[int] = None) -> int:
    """--threads wins over PATCHTRIAGE_THREADS, which wins over 1."""
    if cli_value is not None:
        value = cli_value
    else:
        raw = os.environ.get(THREADS_ENV_VAR)
        if raw is None or raw.strip() == '':
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"thread count must be >= 1, got {value}")
    return value


def set_threads(threads: int) -> None:
    global _threads
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    _threads = threads
    logger.debug("worker threads set to %d", threads)


def get_threads() -> int:
    return _threads


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Map fn over items, results in input order whatever the worker count."""
    items = list(items)
    workers = get_threads() if threads is None else threads
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def chunked(items: List[T], size: int) -> List[List[T]]:
    return [items[start:start + size] for start in range(0, len(items), size)]
