"""Exception and warning types raised across the package."""


class TensorJennError(Exception):
    """Base class for all library errors."""


class DimError(TensorJennError, ValueError):
    pass


class DivByZero(TensorJennError, ZeroDivisionError):
    pass


class SingularMatrix(TensorJennError):
    """Matrix is singular to working precision."""


class PrecisionTooLow(TensorJennError):
    pass


class EigFailure(TensorJennError):
    """The eigensolver missed its residual target after all re-randomizations."""


class RepeatedEigenvalues(TensorJennError):
    pass


class NotDiagonalisable(TensorJennError):
    pass


class ZeroDenominator(TensorJennError, ZeroDivisionError):
    pass


class Infeasible(TensorJennError, ValueError):
    pass


class TensorFormatError(TensorJennError, ValueError):
    pass


class WrongConditionEstimate(UserWarning):
    """Post-hoc residual suggests the condition estimate B was too small."""
