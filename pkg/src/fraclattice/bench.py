"""Wall-time benchmark harness for the samplers."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import baseline, lightcone, tree
from .grid import make_grid

__all__ = ["METHODS", "sampler_for", "time_method", "loglog_slope", "run_bench"]

METHODS = ("cholesky", "circulant", "tree", "lightcone")


def sampler_for(method: str, n: int, hurst: float = 0.7) -> Callable[[int], object]:
    """One-sample callable for ``method`` at size ``n``; setup cost is excluded.

    Cholesky and circulant sampling run uncached so that every call pays for
    its factorization or transform.  The tree sampler uses its initial
    parameters, since cost does not depend on their values.  The light-cone
    network uses depth n.
    """
    if method == "cholesky":
        grid = make_grid(n, 1.0, n, hurst)
        return lambda seed: baseline.cholesky_sample(grid, seed, cache=False)
    if method == "circulant":
        grid = make_grid(n, 1.0, n, hurst)
        return lambda seed: baseline.circulant_sample(grid, seed, cache=False)
    if method == "tree":
        size = 1 << max(0, (n - 1).bit_length())
        params = tree.initial_params(make_grid(size, 1.0, size, hurst))
        return lambda seed: tree.tree_sample(params, n, seed)
    if method == "lightcone":
        grid = make_grid(n, 1.0, n, max(hurst, 0.51))
        table = lightcone.coeff_table(grid)
        return lambda seed: lightcone.sample_increment_batch(grid, seed, 1, table=table)
    raise ValueError(f"unknown method {method!r}")


def time_method(method: str, n: int, reps: int = 3, hurst: float = 0.7) -> float:
    """Median wall time of ``reps`` samples after one discarded warm-up call."""
    fn = sampler_for(method, n, hurst)
    fn(0)
    times = []
    for r in range(reps):
        t0 = time.perf_counter()
        fn(r + 1)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def loglog_slope(sizes, seconds) -> float | None:
    if len(sizes) < 2:
        return None
    return float(np.polyfit(np.log(sizes), np.log(seconds), 1)[0])


def run_bench(methods, sizes, reps: int = 3, hurst: float = 0.7):
    """Returns (rows of (method, n, median_seconds), {method: slope or None})."""
    rows, slopes = [], {}
    for method in methods:
        ts = []
        for n in sizes:
            ts.append(time_method(method, n, reps, hurst))
            rows.append((method, n, ts[-1]))
        slopes[method] = loglog_slope(list(sizes), ts)
    return rows, slopes
