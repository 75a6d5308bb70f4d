"""Exception types shared across the package."""


class InvalidParam(ValueError):
    """A configuration or generator parameter is out of its valid range."""


class DegenerateInput(ValueError):
    """Input data is rank-deficient (too few pairs, or colinear/parallel sources)."""


class ZeroVector(ValueError):
    """A vector that must have positive norm is (numerically) zero."""


class ParseError(ValueError):
    """A data file could not be parsed.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ArityError(ParseError):
    """Rows in a correspondence file do not all have the same field count."""


class UnsupportedFormat(ValueError):
    """The file is recognized but in a variant this package does not read."""
