"""Exception hierarchy shared by all psdreg modules."""


class PsdRegError(Exception):
    """Base class for every error raised by psdreg."""


class DimensionError(PsdRegError, ValueError):
    """Operands have incompatible shapes."""


class DegenerateInputError(PsdRegError, ValueError):
    """Input is rank deficient where full rank is required."""


class DomainError(PsdRegError, ValueError):
    """Input lies outside the domain of the operation (e.g. not SPD)."""


class StepFailureError(PsdRegError):
    """A retraction could not be evaluated at the requested step size."""


class ConfigurationError(PsdRegError, ValueError):
    """Invalid or mutually inconsistent configuration."""


class DataError(PsdRegError, ValueError):
    """Malformed input data (parse errors carry the offending line number)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(PsdRegError, ValueError):
    """Bad magic, unsupported version or truncated payload in a model file."""


class DivergenceError(PsdRegError):
    """An online run produced a non-finite cost.

    The partial :class:`~psdreg.optim.FitReport` is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
