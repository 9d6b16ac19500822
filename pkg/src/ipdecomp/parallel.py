"""Ordered parallel map over blocks.

Results always come back in input order, so reductions over them are
independent of the worker count and of completion order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


class BlockPool:
    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self._executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def map(self, fn, *iterables) -> list:
        if self._executor is None:
            return list(map(fn, *iterables))
        return list(self._executor.map(fn, *iterables))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
