"""Exception hierarchy shared across the package."""


class SatmapError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SatmapError):
    """A textual input document (DFG, architecture, mapping, DIMACS) is malformed.

    Carries an optional (line, column) position for syntax-level problems.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)
        self.line = line
        self.column = column


class IntegrityError(SatmapError):
    """A solver model or decoded mapping failed an internal consistency check.

    Raised instead of silently accepting questionable results: a model that
    does not satisfy its own formula, a decode with zero or multiple true
    placement literals for a node, or a decoded mapping that the independent
    checker rejects.
    """


class OracleCapError(SatmapError):
    """Exhaustive search was requested on an instance above its size cap."""


class DeadlineExceeded(SatmapError):
    """An operation ran past the wall-clock budget assigned to it."""
