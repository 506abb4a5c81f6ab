from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")


def batched(items: Iterable[T], size: int) -> Iterator[list[T]]:
    """
    Consecutive blocks of up to `size` items (drive columns, in practice).
    Block boundaries depend only on `size`, never on the thread count.
    """
    if size <= 0:
        raise ValueError("batch size must be > 0")
    it = iter(items)
    while True:
        chunk = list(islice(it, size))
        if not chunk:
            break
        yield chunk


def ordered_map(fn: Callable[[T], R], items: Sequence[T], *, threads: int = 1) -> list[R]:
    """
    Apply `fn` to every item and return the results in input order.
    threads <= 1 runs inline; otherwise a thread pool is used. Exceptions
    propagate from the first failing item (in input order).
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in futures]
