"""Chunked, order-preserving execution and deterministic reductions.

Work over paths is cut into chunks of a fixed size that does not depend on
the worker count.  Chunk results are combined with a fixed-shape pairwise
tree, so sums come out bit-identical for any number of threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

DEFAULT_CHUNK = 4096


def resolve_threads(threads):
    """``0`` or ``None`` means one worker per available core."""
    if threads is None or threads == 0:
        return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
                   else os.cpu_count() or 1)
    if threads < 0:
        raise ValueError("thread count must be non-negative")
    return int(threads)


def chunk_bounds(n_paths, chunk=DEFAULT_CHUNK):
    """``[(start, count), ...]`` covering ``range(n_paths)``."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    return [(s, min(chunk, n_paths - s)) for s in range(0, n_paths, chunk)]


def map_chunks(func, n_paths, chunk=DEFAULT_CHUNK, threads=1):
    """``[func(start, count) for each chunk]``, possibly computed concurrently.

    BLAS is pinned to one thread inside the workers so that every chunk is
    computed the same way whatever the outer parallelism.
    """
    bounds = chunk_bounds(n_paths, chunk)
    workers = min(resolve_threads(threads), len(bounds))
    with threadpool_limits(limits=1):
        if workers == 1:
            return [func(s, c) for s, c in bounds]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: func(*b), bounds))


def pairwise(items, combine):
    """Reduce ``items`` with a balanced binary tree whose shape depends only on ``len(items)``."""
    items = list(items)
    if not items:
        raise ValueError("nothing to reduce")
    while len(items) > 1:
        nxt = [combine(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


@dataclass(frozen=True)
class Moments:
    """Count, mean and centered sum of squares, elementwise over trailing axes."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples):
        """Moments of ``samples`` along axis 0."""
        x = np.asarray(samples, dtype=float)
        n = x.shape[0]
        mean = x.mean(axis=0)
        return cls(n, mean, ((x - mean) ** 2).sum(axis=0))

    def merge(self, other):
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * (other.n / n)
        m2 = self.m2 + other.m2 + d * d * (self.n * other.n / n)
        return Moments(n, mean, m2)

    @property
    def variance(self):
        return self.m2 / (self.n - 1)

    @property
    def std_error(self):
        return np.sqrt(self.variance / self.n)


def merge_moments(parts):
    return pairwise(parts, Moments.merge)
