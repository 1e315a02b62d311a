"""Exception hierarchy shared by all solver components."""


class KirchhoffLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidDomainError(KirchhoffLabError, ValueError):
    """Grid or field arguments describe an impossible domain."""


class DomainError(KirchhoffLabError, ValueError):
    """A scalar function was evaluated outside its domain."""


class GridMismatchError(KirchhoffLabError, ValueError):
    """Two fields that must share a grid do not."""


class NoConvergenceError(KirchhoffLabError, RuntimeError):
    """An iteration hit its cap.

    ``last`` holds the final iterate (if any) and ``residual`` the last
    measured residual, so callers can inspect how far off it was.
    """

    def __init__(self, message, residual=None, last=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.last = last
        self.iterations = iterations


class BracketError(KirchhoffLabError, RuntimeError):
    """The outer scalar root could not be bracketed."""


class OrderingError(KirchhoffLabError, RuntimeError):
    """A solution left the band between lower and upper barriers."""

    def __init__(self, message, worst_node=None, margin=None):
        super().__init__(message)
        self.worst_node = worst_node
        self.margin = margin


class GradientBoundError(KirchhoffLabError, RuntimeError):
    """The truncation radius could not be grown past the solution gradient."""


class InfeasibleError(KirchhoffLabError):
    """Barrier construction failed for the requested parameters."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason
