"""Fractional Brownian motion and multifractal processes from Gaussian networks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DimensionError,
    DomainError,
    EmbeddingError,
    FactorizationError,
    RangeError,
    ResourceError,
)
from .grid import GridSpec, make_grid  # noqa: E402
from .series import IncrementSeries  # noqa: E402
