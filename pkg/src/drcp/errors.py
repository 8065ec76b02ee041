"""Exception types shared across the package."""


class DrcpError(Exception):
    """Base class for all package errors."""


class NumericalFailure(DrcpError):
    """An iterative solver exceeded its iteration cap or lost conditioning."""


class DegenerateInput(DrcpError):
    """Input data is not full-dimensional where full dimension is required."""


class UnsupportedFamily(DrcpError):
    """The requested operation is not defined for this constraint family."""


class NotStronglyConnected(DrcpError):
    """The directed graph has no directed path between some node pair."""


class GenerationFailed(DrcpError):
    """A random generator exhausted its retry budget."""


class InfeasibleStage(DrcpError):
    """A constraint-removal stage converged to an infeasible problem."""


class DomainError(DrcpError):
    """An argument lies outside its mathematically valid range."""
