import asyncio
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


async def map_in_threads(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Apply a blocking function to every item on worker threads.

    Args:
        fn (callable): Function of one item; it runs via asyncio.to_thread
        items (iterable): Work items
        jobs (int): Maximum number of calls in flight

    Returns:
        list: Results in the order of ``items``, whatever the completion order
    """

    semaphore = asyncio.Semaphore(max(1, jobs))

    async def run_one(item):
        async with semaphore:
            return await asyncio.to_thread(fn, item)

    return list(await asyncio.gather(*(run_one(item) for item in items)))


def run_parallel(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Synchronous front end of map_in_threads; ``jobs == 1`` runs inline.

    Args:
        fn (callable): Function of one item
        items (iterable): Work items
        jobs (int): Worker count

    Returns:
        list: Results in input order
    """

    items = list(items)
    if jobs <= 1:
        return [fn(item) for item in items]
    return asyncio.run(map_in_threads(fn, items, jobs))
