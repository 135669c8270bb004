"""Exception types shared across the package."""


class CovcastError(Exception):
    """Base class for all package-specific errors."""


class DataError(CovcastError):
    """Malformed or inconsistent input data (CSV schema, duplicate dates, ...)."""


class InsufficientHistoryError(CovcastError):
    """Not enough observations for the requested window or training setup."""


class InsufficientAssetsError(CovcastError):
    """Universe selection cannot satisfy the requested asset counts."""


class IndefiniteMatrixError(CovcastError):
    """A matrix expected to be positive semidefinite is materially indefinite."""


class OptimizationError(CovcastError):
    """Weight optimization failed to produce a feasible result."""


class TrainingDivergedError(CovcastError):
    """Model training produced a non-finite loss."""
