"""Exception hierarchy shared by every sampler and estimator."""


class FracLatticeError(Exception):
    """Base class for all package errors."""


class DomainError(FracLatticeError, ValueError):
    """A parameter lies outside the region where an operation is defined."""


class DimensionError(FracLatticeError, ValueError):
    """Array shapes are inconsistent with each other or with a grid."""


class RangeError(FracLatticeError, ValueError):
    """A requested fitting window holds too few grid points."""


class ResourceError(FracLatticeError, MemoryError):
    """The requested network would exceed the configured memory budget."""


class FactorizationError(FracLatticeError, ArithmeticError):
    """Cholesky factorization of a covariance matrix failed."""


class EmbeddingError(FracLatticeError, ArithmeticError):
    """Circulant embedding produced a significantly negative eigenvalue."""


class ConvergenceError(FracLatticeError, RuntimeError):
    """An optimizer made the objective worse on an accepted step."""
