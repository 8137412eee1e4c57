"""Exception hierarchy. Every library error derives from ``ViseqError``."""


class ViseqError(Exception):
    pass


class NoInteriorEquilibrium(ViseqError, ValueError):
    pass


class NotConcave(ViseqError, ValueError):
    pass


class NoFrames(ViseqError, ValueError):
    pass


class SignalRequired(ViseqError, ValueError):
    pass


class MaxIterExceeded(ViseqError, RuntimeError):
    """Raised by iterative solvers; ``result`` holds the best iterate found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateSlope(ViseqError, ValueError):
    pass


class OutsideUnitInterval(ViseqError, ValueError):
    pass


class KOutOfRange(ViseqError, ValueError):
    pass


class EmptyInput(ViseqError, ValueError):
    pass


class RankDeficient(ViseqError, ValueError):
    pass


class Separation(ViseqError, RuntimeError):
    pass


class NotConverged(ViseqError, RuntimeError):
    pass


class MissingSignal(ViseqError, ValueError):
    pass


class CellTooSmall(ViseqError, ValueError):
    pass


class SchemaError(ViseqError, ValueError):
    pass


class ParseError(ViseqError, ValueError):
    def __init__(self, row, column, message):
        super().__init__(f"row {row}, column {column!r}: {message}")
        self.row = row
        self.column = column
