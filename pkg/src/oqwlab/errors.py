"""Exception hierarchy shared by every oqwlab module."""


class OQWError(Exception):
    """Base class for all library errors."""

    #: process exit status used by the command line front end
    exit_code = 3


class ValidationError(OQWError, ValueError):
    exit_code = 3


class NumericalError(OQWError, ArithmeticError):
    exit_code = 4


class NotHermitian(ValidationError):
    def __init__(self, field: str = "matrix", detail: str = ""):
        self.field = field
        msg = f"{field} is not Hermitian"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NotPSD(ValidationError):
    pass


class BadTrace(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


# same failure, named after the step-level contract
DimensionMismatch = ShapeMismatch


class DegenerateSpectrum(ValidationError):
    pass


class UnknownFrequency(ValidationError, KeyError):
    pass


class ZeroFrequency(ValidationError):
    pass


class BadParameter(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class NoConvergence(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class StepUnstable(NumericalError):
    pass


class ZeroTrace(NumericalError):
    pass
