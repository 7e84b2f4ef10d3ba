"""Light-cone network of Gaussian conditional probabilities.

Level ``n`` of the network (n = 0 is the output row, n = depth the top) holds
``n_steps + n`` cells.  Going down one level every cell adds its two parents,
scales the sum by ``m[n]`` and adds fresh noise::

    Y_n[k] = m[n] * (Y_{n+1}[k] + Y_{n+1}[k+1]) + xi_n[k]

so the noise cell (n, k) reaches output j with weight
``cumulative_m(n) * C(n, k - j)``.  The per-level coefficients follow the
power-law/binomial parameterization

    cumulative_m(n) = eps * tau_n**(H-1) * [n C(2n, n)]**(-1/2),   n >= 1

with tau_n = eps*sqrt(n), and every level injects noise with the constant
standard deviation sigma/2 * sqrt(H|2H-1| / Gamma(1-H)).  The overall output
scale is fixed by a least-squares fit of the implied path covariance to the
exact fBm law (see :func:`coeff_table`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import gamma, gammainc, gammaln

from . import rng
from .errors import DomainError, ResourceError
from .fbm_cov import CovarianceMatrix, partial_sum_cov, path_cov_matrix
from .grid import GridSpec
from .series import IncrementSeries

__all__ = [
    "CoefficientTable",
    "coeff_table",
    "level_noise_std",
    "log_binom",
    "propagate",
    "draw_noise",
    "sample_increments",
    "sample_increment_batch",
    "weight_table",
    "reconstruct",
    "raw_lag_cov",
    "model_cov",
    "verify_vandermonde",
    "verify_stirling_ratio",
    "verify_gamma_limit",
    "MEMORY_BUDGET",
]

# max number of network cells (depth * (n_steps + depth)) for one sample
MEMORY_BUDGET = 50_000_000


def log_binom(n, k):
    """log C(n, k) via log-Gamma; -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    valid = (k >= 0) & (k <= n)
    kk = np.where(valid, k, 0.0)
    out = gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1)
    return np.where(valid, out, -np.inf)


def level_noise_std(hurst: float, sigma: float) -> float:
    return 0.5 * sigma * math.sqrt(hurst * abs(2 * hurst - 1) / gamma(1 - hurst))


@dataclass(frozen=True)
class CoefficientTable:
    """Per-level affine coefficients and noise scales of one network."""

    m: np.ndarray  # m[n] links level n+1 to level n, n = 0..depth-1
    level_std: np.ndarray  # noise std at levels 0..depth
    log_cum: np.ndarray  # log cumulative_m(n), n = 0..depth
    rescale: float = 1.0

    @property
    def depth(self) -> int:
        return self.log_cum.shape[0] - 1

    def cumulative_m(self, n):
        return np.exp(self.log_cum[n])


def _log_cumulative(grid: GridSpec) -> np.ndarray:
    n = np.arange(1, grid.depth + 1, dtype=float)
    tau = grid.eps * np.sqrt(n)
    out = np.zeros(grid.depth + 1)
    out[1:] = (
        math.log(grid.eps)
        + (grid.hurst - 1.0) * np.log(tau)
        - 0.5 * (np.log(n) + log_binom(2 * n, n))
    )
    return out


def raw_lag_cov(log_cum: np.ndarray, level_std: np.ndarray, n_lags: int) -> np.ndarray:
    """Covariance at lags 0..n_lags-1 of the unscaled network outputs.

    Cells at level n shared by outputs i and j contribute
    sum_k C(n, k-i) C(n, k-j) = C(2n, n-|i-j|) (Vandermonde).
    """
    depth = log_cum.shape[0] - 1
    n = np.arange(depth + 1, dtype=float)
    with np.errstate(divide="ignore"):
        base = 2 * log_cum + 2 * np.log(level_std)
    out = np.zeros(n_lags)
    for lag in range(n_lags):
        terms = base + log_binom(2 * n, n - lag)
        out[lag] = np.sum(np.exp(terms[np.isfinite(terms)]))
    return out


def fit_rescale(raw: np.ndarray, grid: GridSpec) -> float:
    """Least-squares scale matching partial sums of ``raw`` to the path covariance."""
    s = partial_sum_cov(toeplitz(raw))
    p = path_cov_matrix(grid).entries
    a2 = float(np.sum(p * s) / np.sum(s * s))
    return math.sqrt(a2)


def coeff_table(grid: GridSpec, rescale: bool = True) -> CoefficientTable:
    """Coefficient table for ``grid``; ``rescale=False`` leaves the output scale at 1."""
    if not isinstance(grid, GridSpec):
        raise DomainError("coeff_table needs a GridSpec")
    log_cum = _log_cumulative(grid)
    m = np.exp(np.diff(log_cum))
    std = np.full(grid.depth + 1, level_noise_std(grid.hurst, grid.sigma))
    if grid.hurst == 0.5:
        std[0] = math.sqrt(grid.eps) * grid.sigma
    alpha = 1.0
    if rescale:
        alpha = fit_rescale(raw_lag_cov(log_cum, std, grid.n_steps), grid)
    return CoefficientTable(m=m, level_std=std, log_cum=log_cum, rescale=alpha)


def _check_budget(n_steps: int, depth: int, budget: int) -> None:
    cells = depth * (n_steps + depth)
    if cells > budget:
        raise ResourceError(
            f"network needs {cells} cells per sample, budget is {budget}"
        )


def _level_generators(seed: int, depth: int, substream: int = rng.NOISE):
    return [rng.stream(seed, substream, n) for n in range(depth + 1)]


def propagate(noise_at, m, n_steps: int, depth: int) -> np.ndarray:
    """Run the pairing recursion from the top level down to level 0.

    ``noise_at(n)`` returns the level-n noise with shape (count, n_steps + n);
    ``m`` is either shape (depth,) or per-sample shape (count, depth).
    """
    m = np.asarray(m, dtype=float)
    y = noise_at(depth)
    for n in range(depth - 1, -1, -1):
        coef = m[n] if m.ndim == 1 else m[:, n : n + 1]
        y = coef * (y[:, :-1] + y[:, 1:]) + noise_at(n)
    return y


def draw_noise(grid: GridSpec, seed: int, count: int = 1, table: CoefficientTable | None = None):
    """Noise field of ``count`` samples: list over levels of (count, n_steps + n) arrays."""
    table = coeff_table(grid) if table is None else table
    gens = _level_generators(seed, grid.depth)
    return [
        gens[n].standard_normal((count, grid.n_steps + n)) * table.level_std[n]
        for n in range(grid.depth + 1)
    ]


def sample_increment_batch(
    grid: GridSpec,
    seed: int,
    count: int,
    table: CoefficientTable | None = None,
    chunk: int = 4096,
    memory_budget: int = MEMORY_BUDGET,
) -> np.ndarray:
    """Increments of ``count`` independent paths, shape (count, n_steps).

    The result does not depend on ``chunk``: each level draws from its own
    stream and rows are consumed in order.
    """
    if not 0.5 < grid.hurst < 1.0:
        raise DomainError(
            f"the light-cone sampler needs hurst in (1/2, 1), got {grid.hurst}"
        )
    _check_budget(grid.n_steps, grid.depth, memory_budget)
    table = coeff_table(grid) if table is None else table
    gens = _level_generators(seed, grid.depth)
    out = np.empty((count, grid.n_steps))
    for lo in range(0, count, chunk):
        c = min(chunk, count - lo)

        def noise_at(n, c=c):
            return gens[n].standard_normal((c, grid.n_steps + n)) * table.level_std[n]

        out[lo : lo + c] = propagate(noise_at, table.m, grid.n_steps, grid.depth)
    return table.rescale * out


def sample_increments(grid: GridSpec, seed: int, **kw) -> IncrementSeries:
    x = sample_increment_batch(grid, seed, 1, **kw)[0]
    return IncrementSeries(x, grid.eps, {"method": "lightcone", "seed": seed})


def weight_table(grid: GridSpec, table: CoefficientTable | None = None) -> np.ndarray:
    """Weights w[j, n, k] of noise cell (n, k) in output increment j.

    ``w = cumulative_m(n) * C(n, k - j)`` inside the light cone and 0 outside;
    noise scales and the output rescaling are not included.
    """
    table = coeff_table(grid, rescale=False) if table is None else table
    n_out, depth = grid.n_steps, grid.depth
    j = np.arange(n_out)[:, None, None]
    n = np.arange(depth + 1)[None, :, None]
    k = np.arange(n_out + depth)[None, None, :]
    logw = table.log_cum[n] + log_binom(n, k - j)
    inside = (k - j >= 0) & (k - j <= n)
    return np.where(inside, np.exp(np.where(inside, logw, 0.0)), 0.0)


def reconstruct(weights: np.ndarray, noise: list[np.ndarray]) -> np.ndarray:
    """Outputs sum_{n,k} w[j,n,k] xi[n][:, k] for every sample; shape (count, n_out)."""
    out = 0.0
    for n, xi in enumerate(noise):
        width = xi.shape[1]
        out = out + xi @ weights[:, n, :width].T
    return out


def model_cov(grid: GridSpec, table: CoefficientTable | None = None) -> CovarianceMatrix:
    """Exact covariance of the truncated network's increments (rescaling included)."""
    table = coeff_table(grid) if table is None else table
    raw = raw_lag_cov(table.log_cum, table.level_std, grid.n_steps)
    return CovarianceMatrix(table.rescale**2 * toeplitz(raw))


def verify_vandermonde(q: int, n: int) -> tuple[int, int]:
    """Exact sum_j C(q,j) C(q,j-n) and C(2q, q-n)."""
    if not (0 <= n <= q <= 60):
        raise DomainError(f"need 0 <= n <= q <= 60, got q={q}, n={n}")
    lhs = sum(comb(q, j) * comb(q, j - n) for j in range(n, q + 1))
    return lhs, comb(2 * q, q - n)


def verify_stirling_ratio(q: int, n: int) -> tuple[float, float]:
    """Exact C(2q, q-n)/C(2q, q) next to its approximation exp(-n^2/q)."""
    if q < 1 or not 0 <= n <= q:
        raise DomainError(f"need q >= 1 and 0 <= n <= q, got q={q}, n={n}")
    exact = float(np.exp(log_binom(2 * q, q - n) - log_binom(2 * q, q)))
    return exact, math.exp(-(n * n) / q)


def _gamma_summand(q, n: int, hurst: float):
    g = q / float(n * n)
    return np.exp(-1.0 / g) * g ** (hurst - 2.0) / float(n * n)


def verify_gamma_limit(n: int, depth: int, hurst: float, direct_cap: int = 10_000_000) -> float:
    """sum_{q=n}^{depth} n^-2 exp(-n^2/q) (q/n^2)^(H-2), which tends to Gamma(1-H).

    Terms beyond ``direct_cap`` are replaced by the integral of the summand
    (an incomplete Gamma function) plus the Euler-Maclaurin endpoint terms.
    """
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"hurst must lie in (0, 1), got {hurst}")
    if n < 1 or depth < n:
        raise DomainError(f"need n >= 1 and depth >= n, got n={n}, depth={depth}")
    total = 0.0
    stop = min(depth, direct_cap)
    for lo in range(n, stop + 1, 1_000_000):
        q = np.arange(lo, min(lo + 1_000_000, stop + 1), dtype=float)
        total += float(np.sum(_gamma_summand(q, n, hurst)))
    if depth > stop:
        a = 1.0 - hurst
        nn = float(n * n)
        integral = gamma(a) * (gammainc(a, nn / stop) - gammainc(a, nn / depth))
        f_lo = float(_gamma_summand(float(stop), n, hurst))
        f_hi = float(_gamma_summand(float(depth), n, hurst))
        total += integral + 0.5 * (f_hi - f_lo)
    return total
