"""Exception types raised by the solver library."""

from numpy.linalg import LinAlgError


class KrylovError(Exception):
    """Base class for every error raised by :mod:`rglgmres`."""


class ShapeError(KrylovError, ValueError):
    """Operands have non-conforming dimensions."""


class ParameterError(KrylovError, ValueError):
    """An argument is outside its admissible range."""


class DegenerateInputError(KrylovError, ValueError):
    """The input carries no information to work with (e.g. a zero residual block)."""


class SemiNormDegeneracyError(DegenerateInputError):
    """The sketch annihilated a nonzero block, so the sketched semi-norm vanished."""


class RankError(KrylovError, LinAlgError):
    """A matrix that must have full column rank does not."""


class ConditioningError(KrylovError, LinAlgError):
    """A Gram matrix is too ill-conditioned to invert reliably."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NumericalFailure(KrylovError, ArithmeticError):
    """NaN or Inf appeared during an iteration."""

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ResourceError(KrylovError, MemoryError):
    """The requested run would exceed the configured memory budget."""


class MatrixMarketError(KrylovError, ValueError):
    """Malformed Matrix Market input."""

    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
