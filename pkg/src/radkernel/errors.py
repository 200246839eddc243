"""Exception hierarchy.

``ValidationError`` subclasses signal bad input (CLI exit code 2);
``NumericalError`` subclasses signal a computation that did not converge or
could not be trusted (exit code 3).
"""


class RadKernelError(Exception):
    pass


class ValidationError(RadKernelError, ValueError):
    pass


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class AsymptoticsError(ValidationError):
    """A potential does not have the declared limits at 0 or infinity."""


class BracketError(ValidationError):
    pass


class HypothesisError(ValidationError):
    """A bound's hypothesis is not met, so the check refuses to run."""


class CoverageError(ValidationError):
    pass


class NumericalError(RadKernelError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    pass


class NonContractingError(ConvergenceError):
    pass


class IntegrationError(NumericalError):
    """ODE integration blew up or the step size underflowed."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class ConditioningError(NumericalError):
    pass


class UnclassifiableError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass
