"""Exception types raised by the package."""


class SpinCavityError(Exception):
    """Base class for all package errors."""


class InvalidInput(SpinCavityError, ValueError):
    """Input parameters are non-finite, out of range or inconsistent."""


class SingularPoint(SpinCavityError, ArithmeticError):
    """Evaluation hit a pole of the level shift or the resolvent.

    Attributes
    ----------
    index : int or None
        Position in the evaluation grid, if known.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NoSteadyState(SpinCavityError):
    """A lossless system has no driven steady state."""


class ConvergenceError(SpinCavityError, RuntimeError):
    """An iterative solver failed to converge.

    Attributes
    ----------
    state : dict
        Solver state at termination, for diagnostics.
    """

    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = dict(state or {})
