"""Exception hierarchy shared by every module of the package."""

from sklearn.exceptions import ConvergenceWarning

__all__ = [
    "MblkamError",
    "ConfigError",
    "DimensionError",
    "NumericalError",
    "ConvergenceWarning",
]


class MblkamError(Exception):
    """Base class for errors raised by mblkam."""


class ConfigError(MblkamError, ValueError):
    """Invalid run configuration or distribution parameters."""


class DimensionError(MblkamError, ValueError):
    """Chain too long for the dense representation, or mismatched shapes."""


class NumericalError(MblkamError, RuntimeError):
    """A numerical routine failed (non-finite values, no convergence).

    ``details`` carries whatever diagnostics the raising routine collected,
    e.g. the offending basis pair of a non-finite energy denominator.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
