"""Exception hierarchy shared across the package."""


class DotError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(DotError):
    """Inputs whose shapes or lengths are inconsistent."""


class DegenerateInputError(DotError):
    """Inputs that are structurally unusable, e.g. a zero-sum distribution."""


class ConfigurationError(DotError):
    """Invalid run configuration, e.g. an empty shared-gene set."""


class ParseError(DotError):
    """Malformed input file; the message names the offending line."""


class NumericalError(DotError):
    """Internal numerical failure, e.g. a non-finite gradient entry."""


class DotWarning(UserWarning):
    """Category for recoverable irregularities (extra rows, tiny inputs)."""
