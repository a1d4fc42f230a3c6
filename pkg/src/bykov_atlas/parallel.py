from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

JOBS_ENV = "BYKOV_ATLAS_JOBS"


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV, "1") or 1)
    return max(1, int(jobs))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], jobs: int | None = 1) -> list[R]:
    """Map ``fn`` over ``items``; results come back in input order for any worker count."""
    items = list(items)
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
