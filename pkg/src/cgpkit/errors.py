"""Exception types shared across the package."""


class CgpError(Exception):
    """Base class for all cgpkit errors."""


class FactorizationFailure(CgpError):
    """A covariance matrix could not be factorized even after jittering."""


class DimensionMismatch(CgpError):
    """Inputs have inconsistent shapes or the wrong input dimension."""


class OptimizerDiverged(CgpError):
    """The hyperparameter optimizer ended at a non-finite objective."""


class DegenerateInducing(CgpError):
    """Inducing inputs contain (near-)duplicate locations."""


class InvalidRange(CgpError):
    """An input range is empty or inverted."""


class InvalidInput(CgpError):
    """An argument violates a documented precondition."""


class InvalidTransform(CgpError):
    """The requested series transform does not apply here."""


class ParseError(CgpError):
    """A data file could not be parsed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptySeries(CgpError):
    """Ingestion produced a series with no usable rows."""


class ConfigError(CgpError):
    """An experiment config violates the schema.

    ``pointer`` is a JSON pointer to the offending field.
    """

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")
