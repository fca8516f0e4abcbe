"""Shared helpers: log-spaced grids, counter-based seeding, chunked parallel map."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .errors import GridError

#: default relative tolerance for scalar comparisons
REL_TOL = 1e-12


def log_grid(xmax: float = 1e8, points: int = 10**5, xmin: float = 0.0) -> np.ndarray:
    """Log-spaced grid on [xmin, xmax] of the 10^(j/m)-1 style.

    The first point is exactly ``xmin`` (0.0 by default); spacing is geometric
    in 1+x so the grid resolves every decade equally.
    """
    if points < 1:
        raise GridError(f"grid needs at least one point, got {points}")
    if xmax < xmin:
        raise GridError(f"empty grid range [{xmin}, {xmax}]")
    if points == 1:
        return np.array([xmin], dtype=float)
    g = np.geomspace(1.0 + xmin, 1.0 + xmax, points) - 1.0
    g[0] = xmin
    g[-1] = xmax
    return g


def require_grid(grid) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(grid, dtype=float))
    if arr.size == 0:
        raise GridError("empty grid")
    if np.any(~np.isfinite(arr)):
        raise GridError("grid contains non-finite points")
    return arr


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Deterministic generator addressed by (seed, path...).

    Counter-based: the stream depends only on the address, never on how many
    other streams were drawn before it, so worker count cannot change results.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path)))


def chunk_indices(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map with an optional thread pool; results in input order regardless of
    scheduling, so reductions over them are deterministic."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def rel_margin(margin: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Margin normalized by max(scale, 1)."""
    return np.asarray(margin) / np.maximum(np.asarray(scale), 1.0)
