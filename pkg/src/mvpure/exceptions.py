"""Exception hierarchy shared by every module of the package."""


class MVPureError(Exception):
    """Base class for all errors raised by :mod:`mvpure`."""


class InvalidInput(MVPureError, ValueError):
    """Argument has the wrong shape, symmetry or value."""


class DimensionMismatch(InvalidInput):
    pass


class EmptyInput(InvalidInput):
    pass


class RankOutOfRange(InvalidInput):
    pass


class NumericalFailure(MVPureError, ArithmeticError):
    """An iterative kernel did not converge or produced non-finite output."""


class NotPositiveDefinite(NumericalFailure):
    pass


class ModelValidationError(MVPureError, ValueError):
    """A stochastic linear model violates one of its invariants."""


class RankDeficientH(ModelValidationError):
    pass


class NotSPD(ModelValidationError):
    """``Rx`` or ``Rn`` is not symmetric positive definite.

    The offending matrix name is stored in :attr:`which`.
    """

    def __init__(self, which, message=None):
        self.which = which
        super().__init__(message or f"{which} is not symmetric positive definite")


class TraceNotOne(ModelValidationError):
    pass


class NonpositiveEps(ModelValidationError):
    pass
