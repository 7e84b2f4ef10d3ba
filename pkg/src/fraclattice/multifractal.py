"""Self-similar multipliers and the multifractal light-cone sampler.

A multiplier process M(t), t >= base_scale, randomizes the level
coefficients of the light-cone network::

    cumulative_m(n) = sqrt(tau_n**-p * M(tau_n) / eps) * [n C(2n, n)]**(-1/2)

with ``p = virtual_decay_exponent`` (4 by default) and unit-sigma noise at
every level.  The virtual time tau_1 is mapped onto ``base_scale`` so that
M(tau_1) = 1.  One multiplier path is shared by all levels of a sample;
conditional on it the increments are Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from . import rng
from .errors import DomainError
from .grid import GridSpec
from .lightcone import log_binom, propagate, raw_lag_cov
from .series import IncrementSeries

__all__ = [
    "MultiplierProcess",
    "MultiplierPath",
    "lognormal",
    "binomial_cascade",
    "binomial_cascade_measure",
    "sample_multiplier_values",
    "sample_multiplier_path",
    "multiplier_batch",
    "multifractal_log_cumulative",
    "conditional_cov",
    "sample_multifractal_batch",
    "sample_multifractal_increments",
    "moment_scaling_check",
]

VIRTUAL_DECAY_EXPONENT = 4.0


@dataclass(frozen=True)
class MultiplierProcess:
    kind: str  # "lognormal" or "binomial_cascade"
    vol: float = 0.0
    m0: float = 0.5
    levels: int = 20
    base_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("lognormal", "binomial_cascade"):
            raise DomainError(f"unknown multiplier kind {self.kind!r}")
        if self.kind == "lognormal" and not (math.isfinite(self.vol) and self.vol >= 0):
            raise DomainError(f"lognormal volatility must be >= 0, got {self.vol}")
        if self.kind == "binomial_cascade":
            if not 0.0 < self.m0 < 1.0:
                raise DomainError(f"m0 must lie in (0, 1), got {self.m0}")
            if not 1 <= self.levels <= 30:
                raise DomainError(f"cascade levels must be in 1..30, got {self.levels}")
        if not self.base_scale > 0:
            raise DomainError("base_scale must be positive")


def lognormal(vol: float, base_scale: float = 1.0) -> MultiplierProcess:
    return MultiplierProcess("lognormal", vol=vol, base_scale=base_scale)


def binomial_cascade(m0: float, levels: int = 20, base_scale: float = 1.0) -> MultiplierProcess:
    return MultiplierProcess("binomial_cascade", m0=m0, levels=levels, base_scale=base_scale)


@dataclass(frozen=True)
class MultiplierPath:
    values: np.ndarray  # M at virtual levels 0..depth; level 0 has no tau and holds 1
    seed: int

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise DomainError("multiplier values must be positive and finite")


def binomial_cascade_measure(m0: float, levels: int) -> np.ndarray:
    """Masses of the 2**levels dyadic cells; address bits read most significant first."""
    if not 0.0 < m0 < 1.0:
        raise DomainError(f"m0 must lie in (0, 1), got {m0}")
    if not 0 <= levels <= 30:
        raise DomainError(f"levels must be in 0..30, got {levels}")
    masses = np.ones(1)
    for _ in range(levels):
        masses = np.stack([masses * m0, masses * (1.0 - m0)], axis=1).ravel()
    return masses


def sample_multiplier_values(
    proc: MultiplierProcess, t: np.ndarray, gen: np.random.Generator, count: int
) -> np.ndarray:
    """Joint draws of M at the increasing times ``t >= base_scale``; shape (count, len(t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < proc.base_scale * (1 - 1e-12)) or np.any(np.diff(t) < 0):
        raise DomainError("multiplier times must be increasing and >= base_scale")
    s = np.log(t / proc.base_scale)
    if proc.kind == "lognormal":
        ds = np.diff(np.concatenate([[0.0], s]))
        w = np.cumsum(gen.standard_normal((count, t.size)) * np.sqrt(ds), axis=1)
        return np.exp(proc.vol * w - 0.5 * proc.vol**2 * s)
    # Cascade: masses of the nested dyadic cells around a uniform random point,
    # rescaled by 2**k; the resolution k is the dyadic level nearest log2(t/base).
    bits = gen.integers(0, 2, size=(count, proc.levels))
    factors = np.where(bits == 0, 2.0 * proc.m0, 2.0 * (1.0 - proc.m0))
    cum = np.concatenate([np.ones((count, 1)), np.cumprod(factors, axis=1)], axis=1)
    k = np.clip(np.rint(s / math.log(2.0)).astype(int), 0, proc.levels)
    return cum[:, k]


def _level_times(proc: MultiplierProcess, grid: GridSpec) -> np.ndarray:
    n = np.arange(1, grid.depth + 1, dtype=float)
    return proc.base_scale * np.sqrt(n)  # tau_n / tau_1 * base_scale


def multiplier_batch(proc: MultiplierProcess, grid: GridSpec, seed: int, count: int) -> np.ndarray:
    """Multiplier values at levels 0..depth for ``count`` samples (column 0 is 1)."""
    if grid.depth < 1:
        raise DomainError("grid has no virtual levels")
    gen = rng.stream(seed, rng.MULTIPLIER, 0)
    vals = sample_multiplier_values(proc, _level_times(proc, grid), gen, count)
    return np.concatenate([np.ones((count, 1)), vals], axis=1)


def sample_multiplier_path(proc: MultiplierProcess, grid: GridSpec, seed: int) -> MultiplierPath:
    return MultiplierPath(multiplier_batch(proc, grid, seed, 1)[0], seed)


def multifractal_log_cumulative(
    grid: GridSpec, multipliers: np.ndarray, decay_exponent: float = VIRTUAL_DECAY_EXPONENT
) -> np.ndarray:
    """log cumulative_m(n) for each multiplier row; shape (count, depth + 1)."""
    mult = np.atleast_2d(multipliers)
    n = np.arange(1, grid.depth + 1, dtype=float)
    tau = grid.eps * np.sqrt(n)
    out = np.zeros(mult.shape)
    out[:, 1:] = 0.5 * (
        -decay_exponent * np.log(tau) + np.log(mult[:, 1:]) - math.log(grid.eps)
    ) - 0.5 * (np.log(n) + log_binom(2 * n, n))
    return out


def conditional_cov(
    grid: GridSpec, multiplier_values: np.ndarray, decay_exponent: float = VIRTUAL_DECAY_EXPONENT
) -> np.ndarray:
    """Increment covariance given one multiplier path (noise averaged out)."""
    log_cum = multifractal_log_cumulative(grid, multiplier_values, decay_exponent)[0]
    std = np.full(grid.depth + 1, grid.sigma)
    return toeplitz(raw_lag_cov(log_cum, std, grid.n_steps))


def sample_multifractal_batch(
    grid: GridSpec,
    proc: MultiplierProcess,
    seed: int,
    count: int,
    multipliers: np.ndarray | None = None,
    decay_exponent: float = VIRTUAL_DECAY_EXPONENT,
    chunk: int = 4096,
) -> tuple[np.ndarray, np.ndarray]:
    """Increments (count, n_steps) and the multiplier rows used (count, depth + 1).

    Pass a single multiplier row in ``multipliers`` to freeze it across samples.
    """
    if multipliers is None:
        multipliers = multiplier_batch(proc, grid, seed, count)
    else:
        multipliers = np.broadcast_to(np.atleast_2d(multipliers), (count, grid.depth + 1))
    log_cum = multifractal_log_cumulative(grid, multipliers, decay_exponent)
    m = np.exp(np.diff(log_cum, axis=1))
    gens = [rng.stream(seed, rng.NOISE, n) for n in range(grid.depth + 1)]
    out = np.empty((count, grid.n_steps))
    for lo in range(0, count, chunk):
        c = min(chunk, count - lo)

        def noise_at(n, c=c):
            return gens[n].standard_normal((c, grid.n_steps + n)) * grid.sigma

        out[lo : lo + c] = propagate(noise_at, m[lo : lo + c], grid.n_steps, grid.depth)
    return out, np.asarray(multipliers)


def sample_multifractal_increments(
    grid: GridSpec, proc: MultiplierProcess, seed: int, **kw
) -> IncrementSeries:
    x, mult = sample_multifractal_batch(grid, proc, seed, 1, **kw)
    meta = {"method": "multifractal", "seed": seed, "multiplier_seed": seed}
    return IncrementSeries(x[0], grid.eps, meta)


def moment_scaling_check(
    grid: GridSpec,
    proc: MultiplierProcess,
    c: float,
    order: int,
    n_samples: int,
    seed: int = 0,
    decay_exponent: float = VIRTUAL_DECAY_EXPONENT,
) -> tuple[float, float, float]:
    """Monte Carlo check of E[Y_{cT}^q] = E[A(c)^q] E[Y_T^q].

    The network enters Y through sqrt(M), so the amplitude multiplier is
    A(c) = r0**(1/2) * M(base/c)**(1/2), where r0 = Var(Y_cT)/Var(Y_T) of the
    network with M == 1 (computed exactly) carries the deterministic scaling.
    Moments of M come from draws independent of the sampled paths.
    Returns (lhs, rhs, standard error of lhs - rhs).
    """
    if order not in (2, 4):
        raise DomainError(f"order must be 2 or 4, got {order}")
    if n_samples < 10_000:
        raise DomainError("moment scaling needs at least 10,000 samples")
    if not 0.0 < c < 1.0:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    k = c * grid.n_steps
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise DomainError(f"c*T = {k} steps is not on the grid")
    k = int(round(k))

    x, _ = sample_multifractal_batch(grid, proc, seed, n_samples, decay_exponent=decay_exponent)
    b = np.cumsum(x, axis=1)
    y_t, y_ct = b[:, -1] ** order, b[:, k - 1] ** order

    flat = np.ones(grid.depth + 1)
    s = np.cumsum(np.cumsum(conditional_cov(grid, flat, decay_exponent), 0), 1)
    r0 = s[k - 1, k - 1] / s[-1, -1]

    gen = rng.stream(seed, rng.MULTIPLIER_REF, 0)
    a = sample_multiplier_values(proc, np.array([proc.base_scale / c]), gen, n_samples)[:, 0]
    a = a ** (order / 2)
    scale = r0 ** (order / 2)

    lhs = float(y_ct.mean())
    rhs = float(scale * a.mean() * y_t.mean())
    d = y_ct - scale * a.mean() * y_t
    var = d.var(ddof=1) / n_samples + (scale * y_t.mean()) ** 2 * a.var(ddof=1) / n_samples
    return lhs, rhs, float(math.sqrt(var))
