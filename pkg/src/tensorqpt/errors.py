"""Exception hierarchy shared by all tensorqpt modules."""


class TensorQPTError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TensorQPTError, ValueError):
    """Input outside the admissible domain (points outside D1, bad eps, ...)."""


class DuplicatePointsError(DomainError):
    pass


class ResolutionError(DomainError):
    """Discretization too coarse."""


class AnchorPointError(TensorQPTError):
    """The anchor t* cannot be used for the rank-one modification."""


class AlreadySatisfiedError(AnchorPointError):
    """The eigenfunction condition already holds at t*, nothing to modify."""


class NumericalFailure(TensorQPTError, ArithmeticError):
    pass


class ConditioningError(NumericalFailure):
    """Interpolation matrix numerically singular."""


class StructuralError(TensorQPTError):
    """Dimension mismatch or broken structural precondition (nesting, ...)."""


class AssemblyError(TensorQPTError):
    """A tractability assumption needed for assembly is not satisfied."""


class GapViolation(AssemblyError):
    pass


class RateFailure(AssemblyError):
    """Fitted convergence rate is not positive."""


class FitError(TensorQPTError):
    pass


class ConfigError(TensorQPTError):
    pass


class SaturationWarning(UserWarning):
    """Greedy selection stopped early because the power function vanished."""
