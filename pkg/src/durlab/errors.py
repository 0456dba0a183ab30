"""Exception hierarchy shared across the package.

Every error raised deliberately by durlab derives from :class:`DurlabError`
so callers (and the CLI) can map failures to exit codes.
"""


class DurlabError(Exception):
    """Base class for all package errors."""


class ValidationError(DurlabError):
    """Input violates a container or argument invariant."""


class ParseError(ValidationError):
    """Malformed file content."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ParseError):
    """Header does not match the expected schema."""


class ParameterError(ValidationError):
    """Model parameter outside its admissible region."""

    def __init__(self, name, message):
        super().__init__(f"{name}: {message}")
        self.name = name


class DataQualityError(ValidationError):
    """Data are well-formed but economically impossible (e.g. a negative strip price)."""


class ExtrapolationError(ValidationError):
    """A requested maturity lies outside the quoted curve."""


class DegeneracyError(DurlabError):
    """A linear system or design matrix is rank deficient."""

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class NumericalError(DurlabError):
    """Non-finite intermediate result."""


class EstimationError(DurlabError):
    """An estimator failed to produce a usable result."""
