"""Exception hierarchy shared by the library and the command line."""


class SvgpError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(SvgpError, ValueError):
    """Inconsistent shapes, invalid settings or missing columns."""

    exit_code = 2


class DataError(SvgpError):
    """Input data that cannot be used (no usable rows, constant columns...)."""

    exit_code = 3


class NumericalError(SvgpError, ArithmeticError):
    """A factorization failed or a quantity became non-finite."""

    exit_code = 4


class OptimizationError(NumericalError):
    """An optimizer produced a non-finite objective.

    ``state`` holds the last state with a finite objective.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class TrainingError(NumericalError):
    """SVI training aborted; carries the last good model and the trace so far."""

    def __init__(self, message, model=None, trace=None):
        super().__init__(message)
        self.model = model
        self.trace = trace
