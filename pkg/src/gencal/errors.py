"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation problems exit
with 2, numerical failures with 3 and I/O errors with 4.
"""


class GencalError(Exception):
    """Base class for all package errors."""


class DataError(GencalError):
    """Invalid input data: shape mismatch, bad support, malformed file."""


class DomainError(DataError):
    """A value sits on or outside the valid domain of a link or family."""


class ConfigError(DataError):
    """An option or configuration value violates its constraints."""


class FitError(GencalError):
    """A numerical fitting procedure failed."""


class ConvergenceError(FitError):
    """Iterative fit ran out of iterations.

    Carries the deviance trace so callers can inspect the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = tuple(trace) if trace is not None else ()


class DivergenceError(FitError):
    """Linear predictor ran away (separation or overflow guard hit)."""


class RankDeficiencyError(FitError):
    """Design matrix is rank deficient; names the offending columns."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)
