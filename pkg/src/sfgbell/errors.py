"""Exception types shared across the toolkit."""


class SfgBellError(Exception):
    """Base class for all toolkit errors."""


class InvalidState(SfgBellError, ValueError):
    """A qubit state that cannot be normalized or is otherwise malformed."""


class InvalidDensityMatrix(SfgBellError, ValueError):
    """A matrix that is not Hermitian, unit-trace and positive semidefinite."""


class InvalidParameter(SfgBellError, ValueError):
    """A physical parameter outside its admissible range."""


class DegenerateData(SfgBellError, ValueError):
    """Measurement data with no usable information (e.g. zero total counts)."""


class ConvergenceError(SfgBellError, RuntimeError):
    """Raised when an iterative solver does not converge.

    Carries the best iterate found so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(SfgBellError, ValueError):
    """A scenario configuration file that fails to parse or validate."""
