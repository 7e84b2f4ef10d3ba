"""Exact-covariance fGn generators: Cholesky factorization and circulant embedding."""

from __future__ import annotations

import threading

import numpy as np
import scipy.linalg as sla

from . import rng
from .errors import EmbeddingError, FactorizationError
from .fbm_cov import increment_cov, increment_cov_matrix
from .grid import GridSpec
from .series import IncrementSeries

__all__ = [
    "cholesky_factor",
    "cholesky_sample",
    "cholesky_batch",
    "embedding_size",
    "embedding_eigenvalues",
    "circulant_sample",
    "circulant_batch",
    "clear_cache",
]

EMBED_RTOL = 1e-9

_lock = threading.Lock()
_factor_cache: dict[tuple, np.ndarray] = {}
_eig_cache: dict[tuple, np.ndarray] = {}


def _key(grid: GridSpec) -> tuple:
    return (grid.n_steps, grid.eps, grid.hurst, grid.sigma)


def clear_cache() -> None:
    with _lock:
        _factor_cache.clear()
        _eig_cache.clear()


def cholesky_factor(grid: GridSpec, cache: bool = True) -> np.ndarray:
    """Lower-triangular L with L L^T = exact increment covariance."""
    key = _key(grid)
    if cache:
        with _lock:
            hit = _factor_cache.get(key)
        if hit is not None:
            return hit
    try:
        cov = increment_cov_matrix(grid).entries
        factor = sla.cholesky(cov, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FactorizationError(f"Cholesky factorization failed: {exc}") from exc
    if cache:
        with _lock:
            _factor_cache.setdefault(key, factor)
    return factor


def cholesky_batch(grid: GridSpec, seed: int, count: int, cache: bool = True) -> np.ndarray:
    factor = cholesky_factor(grid, cache=cache)
    z = rng.stream(seed, rng.BASELINE, 0).standard_normal((count, grid.n_steps))
    return z @ factor.T


def cholesky_sample(grid: GridSpec, seed: int, cache: bool = True) -> IncrementSeries:
    x = cholesky_batch(grid, seed, 1, cache=cache)[0]
    return IncrementSeries(x, grid.eps, {"method": "cholesky", "seed": seed})


def embedding_size(n_steps: int) -> int:
    """Next power of two >= 2(n_steps - 1), at least 2."""
    target = max(2, 2 * (n_steps - 1))
    return 1 << (target - 1).bit_length()


def embedding_eigenvalues(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of the circulant matrix embedding the increment covariance."""
    size = embedding_size(grid.n_steps)
    half = size // 2
    lags = np.arange(half + 1)
    r = np.atleast_1d(increment_cov(lags, grid.eps, grid.hurst, grid.sigma))
    row = np.concatenate([r, r[-2:0:-1]])
    return np.fft.fft(row).real


def _checked_eigenvalues(grid: GridSpec, cache: bool) -> np.ndarray:
    key = _key(grid)
    if cache:
        with _lock:
            hit = _eig_cache.get(key)
        if hit is not None:
            return hit
    lam = embedding_eigenvalues(grid)
    if lam.min() < -EMBED_RTOL * lam.max():
        raise EmbeddingError(
            f"negative embedding eigenvalue {lam.min():.3e} (max {lam.max():.3e})"
        )
    lam = np.maximum(lam, 0.0)  # only rounding-level negatives reach here
    if cache:
        with _lock:
            _eig_cache.setdefault(key, lam)
    return lam


def _circulant_pairs(grid: GridSpec, gen: np.random.Generator, n_pairs: int, cache: bool):
    lam = _checked_eigenvalues(grid, cache)
    size = lam.shape[0]
    parts = gen.standard_normal((n_pairs, 2, size))
    z = parts[:, 0] + 1j * parts[:, 1]
    w = np.fft.fft(np.sqrt(lam / size) * z, axis=1)[:, : grid.n_steps]
    return w.real, w.imag


def circulant_batch(grid: GridSpec, seed: int, count: int, cache: bool = True) -> np.ndarray:
    """``count`` exact fGn samples; real and imaginary parts give two paths per draw."""
    gen = rng.stream(seed, rng.BASELINE, 1)
    re, im = _circulant_pairs(grid, gen, (count + 1) // 2, cache)
    out = np.empty((count, grid.n_steps))
    out[0::2] = re[: (count + 1) // 2]
    out[1::2] = im[: count // 2]
    return out


def circulant_sample(grid: GridSpec, seed: int, cache: bool = True) -> IncrementSeries:
    x = circulant_batch(grid, seed, 1, cache=cache)[0]
    return IncrementSeries(x, grid.eps, {"method": "circulant", "seed": seed})
