import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from matchci.config.settings import SYSTEM_CONFIG

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        return int(SYSTEM_CONFIG["default_threads"])
    return max(1, int(threads))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> List[R]:
    """Apply ``fn`` to every item, results in input order whatever the thread count."""
    items = list(items)
    workers = min(resolve_threads(threads), len(items))
    if workers <= 1:
        return [fn(item) for item in items]

    logger.debug(f"Running {len(items)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
