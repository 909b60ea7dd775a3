"""Work partitioning and execution for threadgroup-parallel kernels.

A kernel run with configuration (g, t) splits its index space into ``g``
contiguous bands, one per threadgroup; the last band absorbs the remainder
(``n - (g-1)*(n//g)`` items).  Inside a group the band's rows are dealt
round-robin to ``t`` worker threads.  Groups only meet at the final join.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, Tuple, TypeVar

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

T = TypeVar("T")

Band = Tuple[int, int]


@dataclass(frozen=True)
class PartitionPlan:
    """Half-open bands [start, stop) assigned to each threadgroup"""

    n: int
    bands: Tuple[Band, ...]

    @classmethod
    def split(cls, n: int, groups: int) -> "PartitionPlan":
        if groups < 1:
            raise InvalidInputError(f"need at least one group, got {groups}")
        if groups > n:
            raise InvalidInputError(f"{groups} groups exceed dimension {n}")
        size = n // groups
        bands = tuple(
            (i * size, n if i == groups - 1 else (i + 1) * size) for i in range(groups)
        )
        return cls(n=n, bands=bands)

    @property
    def groups(self) -> int:
        return len(self.bands)

    def covers(self) -> bool:
        return bool(self.bands) and self.bands[0][0] == 0 and self.bands[-1][1] == self.n and all(
            prev[1] == nxt[0] for prev, nxt in zip(self.bands, self.bands[1:])
        )

    def disjoint(self) -> bool:
        return all(start < stop for start, stop in self.bands) and all(
            prev[1] <= nxt[0] for prev, nxt in zip(self.bands, self.bands[1:])
        )

    def indices(self, group: int) -> range:
        start, stop = self.bands[group]
        return range(start, stop)


@dataclass(frozen=True)
class GridPlan:
    """Square sqrt(g) x sqrt(g) arrangement of threadgroups over a matrix"""

    side: int
    blocks: PartitionPlan

    @classmethod
    def split(cls, n: int, groups: int) -> "GridPlan":
        side = math.isqrt(groups)
        if side * side != groups:
            raise InvalidInputError(f"square grid needs a perfect-square group count, got {groups}")
        return cls(side=side, blocks=PartitionPlan.split(n, side))

    def cells(self) -> List[Tuple[Band, Band]]:
        """(row band, column band) for each group, row-major over the grid"""
        return [(rows, cols) for rows in self.blocks.bands for cols in self.blocks.bands]

    def covers(self) -> bool:
        return self.blocks.covers() and len(self.cells()) == self.side * self.side

    def disjoint(self) -> bool:
        return self.blocks.disjoint() and len(set(self.cells())) == len(self.cells())


def round_robin(items: Sequence[T], workers: int) -> List[List[T]]:
    """Deal ``items`` to ``workers`` lists: item k goes to worker k mod workers"""
    return [list(items[w::workers]) for w in range(workers)]


def _run_worker(fn: Callable[[T], None], items: Iterable[T]) -> None:
    for item in items:
        fn(item)


def _run_group(items: Sequence[T], threads: int, fn: Callable[[T], None]) -> None:
    if threads == 1:
        _run_worker(fn, items)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_worker, fn, share) for share in round_robin(items, threads)]
        for future in futures:
            future.result()


def run_groups(
    group_items: Sequence[Sequence[T]],
    threads_per_group: int,
    fn: Callable[[T], None],
) -> None:
    """Run ``fn`` over every item, one pool of ``threads_per_group`` per group.

    Returns after every group has joined; the first worker error is re-raised.
    """
    if threads_per_group < 1:
        raise InvalidInputError(f"need at least one thread per group, got {threads_per_group}")

    if len(group_items) == 1:
        _run_group(group_items[0], threads_per_group, fn)
        return

    with ThreadPoolExecutor(max_workers=len(group_items)) as groups:
        futures = [
            groups.submit(_run_group, items, threads_per_group, fn) for items in group_items
        ]
        for future in futures:
            future.result()


def run_flat(items: Sequence[T], workers: int, fn: Callable[[T], None]) -> None:
    """Flat parallel-for over ``items`` with ``workers`` threads"""
    _run_group(items, max(1, workers), fn)
