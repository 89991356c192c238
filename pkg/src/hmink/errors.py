"""Exception types shared across the package."""


class HminkError(Exception):
    """Base class for all errors raised by hmink."""


class BracketError(HminkError, ValueError):
    """Root bracket does not contain a sign change."""


class NonFiniteError(HminkError, ArithmeticError):
    """A function or rate produced NaN or infinity."""


class SubdivisionLimitError(HminkError):
    """Adaptive quadrature hit its subdivision cap.

    The best available estimate is kept on ``estimate``.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class InfeasibleError(HminkError, ValueError):
    """(S, V) pair violates the isoperimetric inequality and bounds no surface."""


class ConvexityError(HminkError):
    """Surface lost strict convexity.

    ``node`` is the offending grid index (if known) and ``surface`` the last
    valid state.
    """

    def __init__(self, message, node=None, surface=None):
        super().__init__(message)
        self.node = node
        self.surface = surface


class StabilityError(HminkError, ValueError):
    """Time step exceeds the explicit-scheme stability gate."""


class FlowError(HminkError):
    """A flow run aborted; ``trace`` holds everything recorded so far."""

    def __init__(self, message, trace=None, cause=None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause
