"""Exception hierarchy shared across the package."""


class MvTestError(Exception):
    """Base class for all errors raised by mvtest."""


class DimensionMismatch(MvTestError, ValueError):
    pass


class DomainError(MvTestError, ValueError):
    pass


class NoConvergence(MvTestError, ArithmeticError):
    pass


class NotPositiveDefinite(MvTestError, ArithmeticError):
    pass


class SingularError(NotPositiveDefinite):
    """The error SSCP matrix is singular (or numerically so)."""


class DegenerateError(MvTestError, ValueError):
    """An F approximation has non-positive degrees of freedom."""


class InvalidSpec(MvTestError, ValueError):
    pass


class AbortError(MvTestError, RuntimeError):
    """Too many replicates of a scenario failed."""


class UnknownPreset(MvTestError, KeyError):
    pass


class ParseError(MvTestError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class TooFewGroups(ParseError):
    pass


class NonNumericResponse(ParseError):
    pass
