"""Deterministic parallel map over independent scan points."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..kernel import ContractError

THREADS_ENV = "ZFDD_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``$ZFDD_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is None or env == "":
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise ContractError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads < 1:
        raise ContractError("thread count must be >= 1")
    return int(threads)


def point_rngs(seed: int, n: int) -> list:
    """One independent generator per scan point, derived from a master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def parallel_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` evaluated on a thread pool; output order follows input order."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
