"""Exact covariance of fractional Brownian motion and the truncation error."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import DimensionError, DomainError
from .grid import GridSpec

__all__ = [
    "CovarianceMatrix",
    "path_cov",
    "increment_cov",
    "increment_cov_asymptote",
    "increment_cov_matrix",
    "path_cov_matrix",
    "partial_sum_cov",
    "truncation_error",
]

PSD_RTOL = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"covariance must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def min_eig_ratio(self) -> float:
        """Smallest eigenvalue divided by the largest (0 for the zero matrix)."""
        w = np.linalg.eigvalsh(self.entries)
        top = max(abs(w[-1]), abs(w[0]))
        return 0.0 if top == 0 else float(w[0] / top)

    def is_psd(self, rtol: float = PSD_RTOL) -> bool:
        return self.min_eig_ratio() >= -rtol

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        for i, row in enumerate(self.entries):
            for j, v in enumerate(row):
                w.writerow([i, j, repr(float(v))])


def _check_hurst(hurst: float) -> None:
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"hurst must lie in (0, 1), got {hurst}")


def path_cov(s, t, hurst: float, sigma: float = 1.0):
    """E[B_s B_t] = sigma^2/2 (t^2H + s^2H - |t-s|^2H)."""
    _check_hurst(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("times must be nonnegative")
    h2 = 2.0 * hurst
    out = 0.5 * sigma**2 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def increment_cov(k, eps: float, hurst: float, sigma: float = 1.0):
    """Covariance of two increments of length eps that are ``k`` steps apart."""
    _check_hurst(hurst)
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * hurst
    out = 0.5 * sigma**2 * eps**h2 * ((k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)
    return float(out) if out.ndim == 0 else out


def increment_cov_asymptote(k, eps: float, hurst: float, sigma: float = 1.0):
    """Large-lag form sigma^2 eps^2 H(2H-1) |k eps|^(2H-2); diverges at k = 0."""
    k = np.abs(np.asarray(k, dtype=float))
    out = sigma**2 * eps**2 * hurst * (2 * hurst - 1) * (k * eps) ** (2 * hurst - 2)
    return float(out) if out.ndim == 0 else out


def increment_cov_matrix(grid: GridSpec) -> CovarianceMatrix:
    row = increment_cov(np.arange(grid.n_steps), grid.eps, grid.hurst, grid.sigma)
    cov = CovarianceMatrix(toeplitz(np.atleast_1d(row)))
    if not cov.is_psd():
        raise DomainError("increment covariance failed the PSD check")
    return cov


def path_cov_matrix(grid: GridSpec) -> CovarianceMatrix:
    t = grid.times
    return CovarianceMatrix(path_cov(t[:, None], t[None, :], grid.hurst, grid.sigma))


def partial_sum_cov(increment_cov: np.ndarray) -> np.ndarray:
    """S[i, j] = sum_{a<=i, b<=j} C[a, b], the path covariance implied by C."""
    return np.cumsum(np.cumsum(np.asarray(increment_cov, dtype=float), axis=0), axis=1)


def truncation_error(model_cov: CovarianceMatrix | np.ndarray, grid: GridSpec) -> float:
    """Maximum gap between the exact path covariance and partial sums of ``model_cov``."""
    c = model_cov.entries if isinstance(model_cov, CovarianceMatrix) else np.asarray(model_cov)
    if c.shape != (grid.n_steps, grid.n_steps):
        raise DimensionError(
            f"model covariance has shape {c.shape}, grid has {grid.n_steps} steps"
        )
    gap = np.abs(path_cov_matrix(grid).entries - partial_sum_cov(c))
    return float(np.max(np.triu(gap)))
