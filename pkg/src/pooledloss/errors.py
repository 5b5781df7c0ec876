"""Exception hierarchy shared by every module.

Each exception carries the name of the violated invariant so callers
(notably the CLI) can map failures to exit codes without string parsing.
"""


class PooledLossError(Exception):
    """Base class for all library errors."""


class ValidationError(PooledLossError, ValueError):
    """Bad user input: parameters, grids, configs."""


class NegativeParameter(ValidationError):
    pass


class BadWeights(ValidationError):
    pass


class EmptyPortfolio(ValidationError):
    pass


class NonFiniteInput(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class TimeOffGrid(ValidationError):
    pass


class HorizonOffGrid(TimeOffGrid):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotSymmetric(ValidationError):
    pass


class MomentVectorTooShort(ValidationError):
    pass


class RequiresZeroBetaS(ValidationError):
    pass


class MismatchedPaths(ValidationError):
    pass


class BadLevel(ValidationError):
    pass


class DegenerateInputs(ValidationError):
    pass


class NumericalError(PooledLossError, ArithmeticError):
    """A computation left its domain of validity."""


class NonFiniteCoefficient(NumericalError):
    pass


class ExcessiveNegativity(NumericalError):
    pass


class SingularObservedBlock(NumericalError):
    pass


class UnstableBlowup(NumericalError):
    pass


class IllConditionedPsi(NumericalError):
    pass
