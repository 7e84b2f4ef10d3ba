"""Discretization of real time and virtual time."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["GridSpec", "make_grid"]


@dataclass(frozen=True)
class GridSpec:
    """Real-time grid t_k = k*eps and virtual-time grid tau_n = eps*sqrt(n).

    The virtual step is fixed to eps**2, so tau_n**2 is uniformly spaced.
    ``depth`` is the number of virtual levels above the output row (level 0).
    """

    n_steps: int
    eps: float
    depth: int
    hurst: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        _validate(self.n_steps, self.eps, self.depth, self.hurst, self.sigma)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.eps

    def real_time(self, k):
        return np.multiply(k, self.eps) if np.ndim(k) else k * self.eps

    def virtual_time(self, n):
        if np.ndim(n):
            return self.eps * np.sqrt(np.asarray(n, dtype=float))
        return self.eps * math.sqrt(n)

    @property
    def times(self) -> np.ndarray:
        """Right endpoints t_1..t_N of the increments."""
        return self.eps * np.arange(1, self.n_steps + 1, dtype=float)

    @property
    def virtual_times(self) -> np.ndarray:
        return self.eps * np.sqrt(np.arange(self.depth + 1, dtype=float))

    def with_depth(self, depth: int) -> "GridSpec":
        return GridSpec(self.n_steps, self.eps, depth, self.hurst, self.sigma)


def _validate(n_steps, eps, depth, hurst, sigma) -> None:
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")
    if not isinstance(depth, (int, np.integer)) or depth < 1:
        raise DomainError(f"depth must be a positive integer, got {depth!r}")
    for name, val in (("eps", eps), ("sigma", sigma)):
        if not (math.isfinite(val) and val > 0):
            raise DomainError(f"{name} must be finite and positive, got {val!r}")
    if not (math.isfinite(hurst) and 0.0 < hurst < 1.0):
        raise DomainError(f"hurst must lie in the open interval (0, 1), got {hurst!r}")
    if depth < n_steps:
        raise DomainError(f"depth ({depth}) must be >= n_steps ({n_steps})")


def make_grid(
    n_steps: int,
    eps: float = 1.0,
    depth: int | None = None,
    hurst: float = 0.5,
    sigma: float = 1.0,
) -> GridSpec:
    """Build a validated grid; ``depth`` defaults to ``n_steps**2``."""
    if depth is None:
        depth = n_steps * n_steps
    return GridSpec(int(n_steps), float(eps), int(depth), float(hurst), float(sigma))
