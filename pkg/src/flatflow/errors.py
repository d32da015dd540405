"""Exception types raised across flatflow."""


class FlatflowError(Exception):
    """Base class for library errors."""


class ValidationError(FlatflowError):
    """A surface descriptor does not describe a valid flat cone surface."""

    def __init__(self, kind, detail=""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}" if detail else kind)


class InvalidCrossing(FlatflowError):
    pass


class BudgetExceeded(FlatflowError):
    """A resource guard tripped. The result is unknown, not empty."""

    def __init__(self, what, limit):
        self.what = what
        self.limit = limit
        super().__init__(f"{what} budget of {limit} exceeded")


class WorkLimitExceeded(BudgetExceeded):
    pass


class CutoffTooLarge(BudgetExceeded):
    pass


class ConeHit(FlatflowError):
    """Raised by the Stop policy; carries the path truncated at the cone point."""

    def __init__(self, time, cone_class, path=None):
        self.time = time
        self.cone_class = cone_class
        self.path = path
        super().__init__(f"hit cone class {cone_class} at t={time:.12g}")


class InvalidTurn(FlatflowError):
    pass


class DegenerateStart(FlatflowError):
    pass


class NotComparable(FlatflowError):
    pass


class WindowExceeded(FlatflowError):
    pass


class ClassMismatch(FlatflowError):
    pass


class NotFound(FlatflowError):
    pass


class HorizonError(FlatflowError):
    """Trace data does not reach far enough to evaluate a one-sided quantity."""


class NotInG(FlatflowError):
    def __init__(self, index=None, detail=""):
        self.index = index
        super().__init__(f"segment {index} is not in G(eta) {detail}".strip())


class ConnectorNotFound(FlatflowError):
    pass


class Infeasible(FlatflowError):
    def __init__(self, threshold, detail=""):
        self.threshold = threshold
        super().__init__(f"target length below certified threshold {threshold:.9g} {detail}".strip())


class TauTooSmall(FlatflowError):
    def __init__(self, threshold):
        self.threshold = threshold
        super().__init__(f"tau must be at least {threshold}")


class NotFoundWithinBudget(FlatflowError):
    pass


class InsufficientData(FlatflowError):
    pass


class EmptyWindow(FlatflowError):
    pass
