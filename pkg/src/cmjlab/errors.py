"""Exception hierarchy shared by every cmjlab module."""


class CMJError(Exception):
    """Base class for all cmjlab errors."""


class ParameterError(CMJError, ValueError):
    """An input parameter is invalid (non-finite, out of range, malformed)."""


class OutOfRangeError(CMJError, ValueError):
    """A query falls outside the portion of a path that was simulated."""


class PreconditionError(CMJError, ValueError):
    """An operation was called outside its documented domain."""


class NumericalError(CMJError, RuntimeError):
    """A numerical kernel failed to converge."""


class QuadratureError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConsistencyError(CMJError, RuntimeError):
    """An internal identity that must hold was violated."""


class ReliabilityError(CMJError, RuntimeError):
    """Too many replicas were unusable for the estimate to be trusted."""


class HorizonTooShortError(CMJError, ValueError):
    """Truncation at the simulation horizon is not numerically negligible."""
