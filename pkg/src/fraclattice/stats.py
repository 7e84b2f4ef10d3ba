"""Estimators that close the verification loop.

Samples are passed either as a list of :class:`IncrementSeries` or as an
array of shape (count, n_steps).  Standard errors for Gaussian data use the
fourth-moment formula; for non-Gaussian input the batch-means variants
(32 batches by default) should be preferred.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DimensionError, RangeError
from .fbm_cov import CovarianceMatrix
from .series import IncrementSeries

__all__ = [
    "as_increment_array",
    "CovAccumulator",
    "empirical_cov",
    "ols_slope",
    "variance_growth_fit",
    "structure_function",
    "dyadic_lags",
    "zeta_fit",
    "zeta_constancy",
    "stochastic_integral",
    "excess_kurtosis",
    "batch_se",
    "write_estimates_csv",
]

N_BATCHES = 32


def as_increment_array(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        arr = samples
    else:
        rows = [s.increments if isinstance(s, IncrementSeries) else np.asarray(s) for s in samples]
        if len({r.shape for r in rows}) > 1:
            raise DimensionError("samples have unequal lengths")
        arr = np.array(rows)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d sample array, got shape {arr.shape}")
    return arr.astype(float, copy=False)


@dataclass
class CovAccumulator:
    """Running mean and scatter matrix; batches merge exactly (Chan et al. update)."""

    count: int = 0
    mean: np.ndarray | None = None
    scatter: np.ndarray | None = None

    @classmethod
    def from_batch(cls, x: np.ndarray) -> "CovAccumulator":
        x = as_increment_array(x)
        mu = x.mean(axis=0)
        d = x - mu
        return cls(x.shape[0], mu, d.T @ d)

    def merge(self, other: "CovAccumulator") -> "CovAccumulator":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        scatter = self.scatter + other.scatter + np.outer(delta, delta) * self.count * other.count / n
        return CovAccumulator(n, mean, scatter)

    def cov(self) -> np.ndarray:
        return self.scatter / (self.count - 1)


def empirical_cov(samples) -> tuple[CovarianceMatrix, np.ndarray]:
    """Unbiased sample covariance and per-entry standard errors.

    se_ij = sqrt((c_ii c_jj + c_ij^2) / (M - 1)), exact for Gaussian data.
    """
    x = as_increment_array(samples)
    if x.shape[0] < 2:
        raise DimensionError("need at least two samples")
    c = CovAccumulator.from_batch(x).cov()
    d = np.diag(c)
    se = np.sqrt((np.outer(d, d) + c**2) / (x.shape[0] - 1))
    return CovarianceMatrix(c), se


def ols_slope(x, y) -> tuple[float, float]:
    """Slope of an ordinary least-squares line and its residual standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    if x.size <= 2:
        return slope, 0.0
    resid = y - y.mean() - slope * xc
    return slope, float(np.sqrt(resid @ resid / (x.size - 2) / sxx))


def batch_se(values: np.ndarray, stat: Callable[[np.ndarray], float], n_batches: int = N_BATCHES):
    """Standard error of ``stat`` from batch means over contiguous sample blocks."""
    blocks = np.array_split(values, n_batches)
    est = np.array([stat(b) for b in blocks if len(b)])
    return float(est.std(ddof=1) / np.sqrt(est.size))


def _fit_window(times: np.ndarray, t_min: float, t_max: float, dyadic: bool) -> np.ndarray:
    idx = np.flatnonzero((times >= t_min * (1 - 1e-12)) & (times <= t_max * (1 + 1e-12)))
    if dyadic:
        steps = np.round(times[idx] / times[0]).astype(int)
        idx = idx[(steps & (steps - 1)) == 0]
    if idx.size < 4:
        raise RangeError(f"only {idx.size} grid points in [{t_min}, {t_max}], need 4")
    return idx


def variance_growth_fit(
    paths,
    times: np.ndarray,
    t_min: float,
    t_max: float,
    dyadic: bool = False,
    n_batches: int = N_BATCHES,
) -> tuple[float, float]:
    """Slope of log E[B_t^2] against log t over the grid points in [t_min, t_max].

    ``paths`` holds cumulative paths B_{t_k}, shape (count, len(times)).
    The error is a batch-means estimate when there are enough paths, the OLS
    residual error otherwise.
    """
    b = as_increment_array(paths)
    times = np.asarray(times, dtype=float)
    idx = _fit_window(times, t_min, t_max, dyadic)
    logt = np.log(times[idx])

    def slope(block: np.ndarray) -> float:
        return ols_slope(logt, np.log(np.mean(block[:, idx] ** 2, axis=0)))[0]

    s, resid_se = ols_slope(logt, np.log(np.mean(b[:, idx] ** 2, axis=0)))
    if b.shape[0] >= 2 * n_batches:
        return s, batch_se(b, slope, n_batches)
    return s, resid_se


def _with_origin(paths: np.ndarray) -> np.ndarray:
    return np.concatenate([np.zeros((paths.shape[0], 1)), paths], axis=1)


def structure_function(paths, q: float, lags: Iterable[int]) -> dict[int, float]:
    """S_q(lag) = mean over t and samples of |B_{t+lag} - B_t|^q (B_0 = 0)."""
    b = _with_origin(as_increment_array(paths))
    out = {}
    for lag in lags:
        if not 0 < lag < b.shape[1]:
            raise RangeError(f"lag {lag} outside the grid")
        out[int(lag)] = float(np.mean(np.abs(b[:, lag:] - b[:, :-lag]) ** q))
    return out


def dyadic_lags(n_steps: int, lo: int = 2, hi: int | None = None) -> list[int]:
    hi = n_steps // 8 if hi is None else hi
    lags, lag = [], lo
    while lag <= hi:
        lags.append(lag)
        lag *= 2
    return lags


def _zeta(paths: np.ndarray, qs: Sequence[float], lags: Sequence[int]) -> np.ndarray:
    loglag = np.log(lags)
    out = []
    for q in qs:
        s = structure_function(paths, q, lags)
        out.append(ols_slope(loglag, np.log([s[lag] for lag in lags]))[0])
    return np.array(out)


def zeta_fit(paths, qs: Sequence[float], lags: Sequence[int], n_batches: int = N_BATCHES):
    """Scaling exponents zeta(q) with batch-means standard errors."""
    b = as_increment_array(paths)
    z = _zeta(b, qs, lags)
    blocks = [_zeta(blk, qs, lags) for blk in np.array_split(b, n_batches)]
    se = np.std(blocks, axis=0, ddof=1) / np.sqrt(len(blocks))
    return z, se


def zeta_constancy(
    paths, qs: Sequence[float], lags: Sequence[int], level: float = 0.95, n_batches: int = N_BATCHES
) -> dict:
    """Test whether zeta(q)/q is the same for all ``qs``.

    Every pairwise difference of zeta(q)/q gets a batch-means standard error;
    the critical value is Bonferroni-corrected so the intervals hold jointly.
    """
    b = as_increment_array(paths)
    qs = list(qs)
    pairs = [(i, j) for i in range(len(qs)) for j in range(i + 1, len(qs))]
    z_crit = float(norm.ppf(1 - (1 - level) / (2 * len(pairs))))

    def ratios(block):
        return _zeta(block, qs, lags) / np.asarray(qs, dtype=float)

    full = ratios(b)
    blocks = np.array([ratios(blk) for blk in np.array_split(b, n_batches)])
    diffs, ses = [], []
    for i, j in pairs:
        diffs.append(full[i] - full[j])
        d = blocks[:, i] - blocks[:, j]
        ses.append(d.std(ddof=1) / np.sqrt(d.size))
    diffs, ses = np.array(diffs), np.array(ses)
    return {
        "zeta_over_q": full,
        "pairs": pairs,
        "diffs": diffs,
        "se": ses,
        "z_crit": z_crit,
        "constant": bool(np.all(np.abs(diffs) <= z_crit * ses)),
    }


def stochastic_integral(path: IncrementSeries, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """Riemann sum sum_j f(t_j) X_{t_j}, evaluated at the right endpoints t_j = j*eps."""
    vals = np.broadcast_to(np.asarray(f(path.times), dtype=float), path.increments.shape)
    return float(vals @ path.increments)


def excess_kurtosis(x: np.ndarray, axis=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x - x.mean(axis=axis, keepdims=True)
    m2 = np.mean(d**2, axis=axis)
    m4 = np.mean(d**4, axis=axis)
    return m4 / m2**2 - 3.0


def write_estimates_csv(fh, rows: Iterable[tuple]) -> None:
    """Rows of (quantity, param, value, stderr)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["quantity", "param", "value", "stderr"])
    for quantity, param, value, stderr in rows:
        w.writerow([quantity, param, repr(float(value)), "" if stderr is None else repr(float(stderr))])
