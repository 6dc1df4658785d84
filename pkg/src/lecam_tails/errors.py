"""Exception hierarchy shared by every module of the package."""


class LecamTailsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(LecamTailsError, ValueError):
    pass


class DomainError(LecamTailsError, ValueError):
    pass


class DegenerateSystemError(LecamTailsError, ArithmeticError):
    pass


class NotADensityError(LecamTailsError):
    """The perturbed density is negative somewhere on its support.

    ``region`` is the (lo, hi) interval holding the offending minimum and
    ``minimal_valid_n`` the smallest sample size at which the same class
    and schedule parameters give a proper density (``None`` if none was
    found within the search cap).
    """

    def __init__(self, message, region=None, min_value=None, minimal_valid_n=None):
        super().__init__(message)
        self.region = region
        self.min_value = min_value
        self.minimal_valid_n = minimal_valid_n


class QuadratureError(LecamTailsError, ArithmeticError):
    pass


class InsufficientDataError(LecamTailsError, ValueError):
    pass


class DegenerateDataError(LecamTailsError, ValueError):
    pass


class ExperimentAbortedError(LecamTailsError):
    pass
