"""Exception types raised across the package."""


class RteMvdrError(Exception):
    """Base class for all errors raised by rtemvdr."""


class InvalidRho(RteMvdrError, ValueError):
    pass


class DegenerateRho(RteMvdrError, ValueError):
    """rho = 1 makes the estimate deterministic; standardization is undefined."""


class InvalidRegime(RteMvdrError, ValueError):
    pass


class RhoOne(InvalidRegime):
    pass


class DegenerateSnapshot(RteMvdrError, ValueError):
    pass


class SingularMatrix(RteMvdrError, ArithmeticError):
    pass


class NonConvergence(RteMvdrError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual

    def __reduce__(self):
        return type(self), (self.args[0], self.iterations, self.residual)


class NoBracket(RteMvdrError, ValueError):
    pass


class QuadratureFailure(RteMvdrError, RuntimeError):
    pass


class DimensionMismatch(RteMvdrError, ValueError):
    pass


class NegativeVariance(RteMvdrError, ArithmeticError):
    pass


class EmptySamples(RteMvdrError, ValueError):
    pass


class SupportMismatch(RteMvdrError, ValueError):
    pass


class TrialError(RteMvdrError):
    """Wraps a failure inside a Monte Carlo trial with its index attached."""

    def __init__(self, trial, cause):
        super().__init__(f"trial {trial}: {type(cause).__name__}: {cause}")
        self.trial = trial
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.trial, self.cause)
