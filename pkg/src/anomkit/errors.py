"""Exception and warning types raised across the package."""


class AnomkitError(ValueError):
    """Base class for all input/contract errors raised by anomkit."""


class MissingColumn(AnomkitError):
    pass


class DuplicateId(AnomkitError):
    pass


class EmptyResult(AnomkitError):
    pass


class NonPositiveHeight(AnomkitError):
    pass


class SchemaMismatch(AnomkitError):
    pass


class KTooLarge(AnomkitError):
    pass


class SampleTooSmall(AnomkitError):
    pass


class TooFewClusters(AnomkitError):
    pass


class CurveTooShort(AnomkitError):
    pass


class NoValidConfig(AnomkitError):
    pass


class UnknownId(AnomkitError):
    pass


class UnknownMethod(AnomkitError):
    pass


class DivergedLoss(ArithmeticError):
    """Training produced a non-finite loss."""


class NoConvergence(UserWarning):
    """Solver hit its iteration cap with the KKT violation above 10 * tol."""


class ConstantColumnWarning(UserWarning):
    """A categorical column has a single category and encodes to a constant."""
