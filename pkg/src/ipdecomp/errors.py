"""Exception hierarchy shared by every layer of the solver."""


class DecompositionError(Exception):
    """Base class for all solver errors."""


class DimensionMismatch(DecompositionError, ValueError):
    pass


class BadSlackBounds(DecompositionError, ValueError):
    pass


class Infeasible(DecompositionError):
    """No strictly interior point satisfies the local equalities."""


class DomainViolation(DecompositionError, ValueError):
    """A function was evaluated on or outside the boundary of its domain."""


class UnsupportedObjective(DecompositionError, TypeError):
    pass


class GenInfeasible(DecompositionError):
    pass


class ProblemFileError(DecompositionError, ValueError):
    """Malformed problem file or unknown field."""


class HessianNotPD(DecompositionError, ArithmeticError):
    """Dual Hessian Cholesky failed; the rank condition is violated or solves are too inexact."""


class MaxIterExceeded(DecompositionError):
    """An iteration budget ran out.

    ``report`` carries the partial result when the caller can still use it
    (the benchmark harness records such runs as budget-exhausted rows).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
