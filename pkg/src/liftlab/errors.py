"""Exception hierarchy shared by every liftlab module."""


class LiftlabError(ValueError):
    """Base class for all validation and synthesis errors."""


class NegativeEntry(LiftlabError):
    def __init__(self, row, col, value, line=None):
        self.row, self.col, self.value, self.line = row, col, value, line
        where = f"row {row}, col {col}"
        if line is not None:
            where = f"line {line}, " + where
        super().__init__(f"negative probability {value!r} at {where}")


class SumOutOfTolerance(LiftlabError):
    pass


class EmptySupport(LiftlabError):
    pass


class LabelMismatch(LiftlabError):
    pass


class AlphaOutOfRange(LiftlabError):
    pass


class ZeroLift(LiftlabError):
    pass


class EmptySubset(LiftlabError):
    pass


class MalformedR(LiftlabError):
    pass


class EmptyPolytope(LiftlabError):
    pass


class InfeasibleTarget(LiftlabError):
    pass


class CapExceeded(LiftlabError):
    pass


class ParseError(LiftlabError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
